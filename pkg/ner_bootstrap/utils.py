import io
import os
import struct
from fractions import Fraction

import msgpack
from six import string_types

from .exceptions import FormatError, MissingFile

_HEADER = struct.Struct('>8sH')


def fold_case(text):
    """Lower-cases `text` one character at a time, keeping its length.

    Characters whose lower-case form is longer than one character (for
    example a dotted capital I) are kept as they are, so offsets computed
    on the folded text index the original text.
    """
    return ''.join(
        folded if len(folded) == 1 else char
        for char, folded in ((c, c.lower()) for c in text)
    )


def overlaps(a_start, a_end, b_start, b_end):
    return a_start < b_end and b_start < a_end


def exact(value):
    """Exact rational form of a decimal config value (0.1 is 1/10)."""
    if isinstance(value, Fraction):
        return value
    return Fraction(str(value))


def open_text(source, mode='r'):
    if isinstance(source, string_types):
        if 'r' in mode and not os.path.exists(source):
            raise MissingFile(source)
        return io.open(source, mode, encoding='utf-8', newline='\n')
    return source


def read_tsv(source, columns, error=ValueError):
    """Yields (line number, fields) for every data line of a TSV file.

    Blank lines and lines starting with '#' are skipped.

    Arguments:
        source: path or open text file
        columns: allowed field counts (int or tuple of ints)
        error: exception class raised on a malformed line
    """
    if not isinstance(columns, tuple):
        columns = (columns, )
    handle = open_text(source)
    try:
        for number, line in enumerate(handle, 1):
            line = line.rstrip('\r\n')
            if not line.strip() or line.startswith('#'):
                continue
            fields = line.split('\t')
            if len(fields) not in columns:
                raise error(
                    '%s:%d: expected %s tab-separated fields, got %d' % (
                        getattr(handle, 'name', '<stream>'),
                        number,
                        ' or '.join(str(c) for c in columns),
                        len(fields)
                    )
                )
            yield number, fields
    finally:
        if handle is not source:
            handle.close()


def dump_binary(path, magic, version, payload):
    data = _HEADER.pack(magic, version) + msgpack.packb(
        payload, use_bin_type=True
    )
    with open(path, 'wb') as handle:
        handle.write(data)


def load_binary(path, magic, versions):
    if not os.path.exists(path):
        raise MissingFile(path)
    with open(path, 'rb') as handle:
        data = handle.read()
    if len(data) < _HEADER.size:
        raise FormatError('%s: truncated header' % path)
    found, version = _HEADER.unpack(data[:_HEADER.size])
    if found != magic:
        raise FormatError('%s: not a %r file' % (path, magic.rstrip(b'\0')))
    if version not in versions:
        raise FormatError('%s: unsupported format version %d' % (
            path, version
        ))
    return version, msgpack.unpackb(
        data[_HEADER.size:], raw=False, strict_map_key=False
    )
