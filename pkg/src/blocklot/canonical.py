"""Canonical bytes and digest primitives shared by every consensus surface.

Selects the compiled serializer kernel when the extension built, else the
pure-Python fallback. Set BLOCKLOT_PURE_PYTHON=1 to force the fallback.
The digest algorithm is fixed here and used nowhere else by name.
"""

import hashlib
import hmac
import os

if os.environ.get("BLOCKLOT_PURE_PYTHON"):
    from ._canonical_py import dumps_canonical as canonical_serialize

    KERNEL = "python"
else:
    try:
        from ._canonical_cy import dumps_canonical as canonical_serialize

        KERNEL = "cython"
    except ImportError:
        from ._canonical_py import dumps_canonical as canonical_serialize

        KERNEL = "python"

HASH_NAME = "sha256"
DIGEST_HEX_LEN = 64
ZERO_DIGEST_HEX = "0" * DIGEST_HEX_LEN


def digest_hex(data: bytes) -> str:
    return hashlib.new(HASH_NAME, data).hexdigest()


def canonical_digest_hex(value) -> str:
    """Digest of the canonical serialization of a structured value."""
    return digest_hex(canonical_serialize(value))


def keyed_mac_hex(key: bytes, payload: bytes) -> str:
    """Keyed-hash MAC used as the demo signature scheme."""
    return hmac.new(key, payload, HASH_NAME).hexdigest()


def macs_equal(a: str, b: str) -> bool:
    return hmac.compare_digest(a, b)
