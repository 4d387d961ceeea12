from .config import load_config  # noqa
from .pipeline import Pipeline  # noqa
