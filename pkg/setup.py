from setuptools import find_packages, setup

NAME = 'ner-bootstrap'
DESCRIPTION = 'Bootstrap named-entity corpora from a gazetteer and OCR pages'
VERSION = '0.1.0'
ENTRY_POINTS = {
    'console_scripts': ['ner-bootstrap = ner_bootstrap.cli:main']
}

setup(
    description=DESCRIPTION,
    entry_points=ENTRY_POINTS,
    include_package_data=True,
    install_requires=open('install_requires.txt').readlines(),
    long_description=open('README.rst').read(),
    name=NAME,
    package_data={'ner_bootstrap': ['data/*.txt']},
    packages=find_packages(exclude=['tests', 'tests.*']),
    version=VERSION
)
