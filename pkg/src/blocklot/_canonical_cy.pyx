# cython: language_level=3
"""Canonical serializer hot kernel: one-pass validation and emission.

Byte-identical to blocklot._canonical_py.dumps_canonical (pinned by a
property test); exists because serialization runs on every signature,
endorsement comparison and hash in the pipeline.
"""

from .errors import UnsupportedValueError

# escape table for control chars; short forms where JSON defines them
cdef list _CTRL = ["\\u%04x" % i for i in range(0x20)]
_CTRL[0x08] = "\\b"
_CTRL[0x09] = "\\t"
_CTRL[0x0A] = "\\n"
_CTRL[0x0C] = "\\f"
_CTRL[0x0D] = "\\r"


cdef int _emit_str(list out, str s) except -1:
    cdef Py_ssize_t i, start, n = len(s)
    cdef Py_UCS4 ch
    out.append('"')
    start = 0
    for i in range(n):
        ch = s[i]
        if ch < 0x20 or ch == 34 or ch == 92:  # control, '"', '\\'
            if i > start:
                out.append(s[start:i])
            if ch == 34:
                out.append('\\"')
            elif ch == 92:
                out.append("\\\\")
            else:
                out.append(_CTRL[<Py_ssize_t> ch])
            start = i + 1
    if start == 0:
        out.append(s)
    elif start < n:
        out.append(s[start:n])
    out.append('"')
    return 0


cdef int _emit_dict(list out, dict d) except -1:
    cdef Py_ssize_t i, n
    for k in d:
        if type(k) is not str:
            raise UnsupportedValueError(f"non-string map key {k!r}")
    cdef list keys = sorted(d)
    n = len(keys)
    out.append("{")
    for i in range(n):
        if i:
            out.append(",")
        _emit_str(out, <str> keys[i])
        out.append(":")
        _emit(out, d[keys[i]])
    out.append("}")
    return 0


cdef int _emit_seq(list out, object seq) except -1:
    cdef Py_ssize_t i = 0
    out.append("[")
    for item in seq:
        if i:
            out.append(",")
        _emit(out, item)
        i += 1
    out.append("]")
    return 0


cdef int _emit(list out, object v) except -1:
    if v is None:
        out.append("null")
        return 0
    if v is True:
        out.append("true")
        return 0
    if v is False:
        out.append("false")
        return 0
    cdef type t = type(v)
    if t is str:
        return _emit_str(out, <str> v)
    if t is int:
        out.append(repr(v))
        return 0
    if t is dict:
        return _emit_dict(out, <dict> v)
    if t is list or t is tuple:
        return _emit_seq(out, v)
    raise UnsupportedValueError(f"unsupported value {v!r}")


def dumps_canonical(value):
    """Serialize ``value`` to its unique canonical byte string."""
    cdef list out = []
    _emit(out, value)
    cdef str text = "".join(out)
    try:
        return text.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise UnsupportedValueError(f"unencodable string: {exc}") from None
