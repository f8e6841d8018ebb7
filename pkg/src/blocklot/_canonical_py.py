"""Pure-Python canonical serializer: the reference emitter and import-time fallback.

Walks the value once to enforce the canonical data model (maps with string
keys, sequences, strings, ints, bools, null - nothing else), then delegates
emission to the stdlib C json encoder, whose sorted-key compact output is
exactly the canonical form: key order by code point (equal to UTF-8 byte
order), ``,``/``:`` separators, minimal-decimal integers, raw UTF-8.
"""

import json

from .errors import UnsupportedValueError

_ALLOWED_SCALARS = (str, int, bool, type(None))


def _validate(value, path):
    t = type(value)
    if t is dict:
        for key, item in value.items():
            if type(key) is not str:
                raise UnsupportedValueError(
                    f"non-string map key {key!r} at {path}"
                )
            _validate(item, f"{path}.{key}")
    elif t is list or t is tuple:
        for i, item in enumerate(value):
            _validate(item, f"{path}[{i}]")
    elif t not in _ALLOWED_SCALARS:
        raise UnsupportedValueError(f"unsupported value {value!r} at {path}")


def dumps_canonical(value) -> bytes:
    """Serialize ``value`` to its unique canonical byte string."""
    _validate(value, "$")
    text = json.dumps(
        value, ensure_ascii=False, sort_keys=True, separators=(",", ":"),
        allow_nan=False,
    )
    try:
        return text.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise UnsupportedValueError(f"unencodable string: {exc}") from None
