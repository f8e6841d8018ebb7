"""Participant identity registry: registration, role gating, demo signatures.

Stands in for a full membership service provider. The signature scheme is a
keyed hash (HMAC-SHA256) deterministic per identity, pluggable behind the
sign/verify contract; key material lives only here, never in world state.
"""

import json
import os
import random
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .canonical import keyed_mac_hex, macs_equal
from .errors import MembershipError


class Role(Enum):
    MEMBER = "MEMBER"
    AUCTIONEER = "AUCTIONEER"


@dataclass(frozen=True)
class Identity:
    identity_id: str
    display_name: str
    role: Role
    key_ref: str
    registered_at_seq: int

    def record(self) -> dict:
        """World-state mirror of the identity (no key material)."""
        return {
            "identityId": self.identity_id,
            "displayName": self.display_name,
            "role": self.role.value,
            "registeredAtSeq": self.registered_at_seq,
        }


@dataclass(frozen=True)
class Signature:
    signer: str
    mac: str

    def record(self) -> dict:
        return {"signer": self.signer, "mac": self.mac}

    @classmethod
    def from_record(cls, rec: dict) -> "Signature":
        return cls(signer=rec["signer"], mac=rec["mac"])


class MembershipRegistry:
    """Single logical store of identities; writes serialized by a lock.

    With a seed, key generation is reproducible, which makes whole scenario
    runs byte-reproducible. ``path`` persists the registry (including demo
    key secrets) so a restarted service can keep verifying signatures.
    """

    def __init__(self, seed: int | None = None, path: str | Path | None = None):
        self._lock = threading.Lock()
        self._identities: dict[str, Identity] = {}
        self._secrets: dict[str, bytes] = {}  # key_ref -> secret
        self._next_seq = 1
        self._rng = random.Random(seed) if seed is not None else None
        self._path = Path(path) if path else None
        if self._path and self._path.exists():
            self._load()

    # -- registration ------------------------------------------------------

    def register(self, display_name: str, role: Role) -> Identity:
        name = display_name.strip() if isinstance(display_name, str) else ""
        if not name:
            raise MembershipError("EMPTY_NAME", "displayName must be non-empty")
        if not isinstance(role, Role):
            role = Role(role)
        with self._lock:
            seq = self._next_seq
            self._next_seq += 1
            identity_id = f"id-{seq:05d}"
            key_ref = f"key-{seq:05d}"
            secret = self._new_secret()
            ident = Identity(identity_id, name, role, key_ref, seq)
            self._identities[identity_id] = ident
            self._secrets[key_ref] = secret
            if self._path:
                self._save()
        return ident

    def _new_secret(self) -> bytes:
        if self._rng is not None:
            return self._rng.randbytes(32)
        return os.urandom(32)

    def get(self, identity_id: str) -> Identity | None:
        return self._identities.get(identity_id)

    def identities(self) -> list[Identity]:
        return sorted(self._identities.values(), key=lambda i: i.registered_at_seq)

    def key_secret_hex(self, identity_id: str) -> str:
        """Demo-grade key export so clients can sign requests."""
        ident = self._require(identity_id)
        return self._secrets[ident.key_ref].hex()

    # -- signing -----------------------------------------------------------

    def sign(self, signer: str, payload: bytes) -> Signature:
        ident = self._require(signer)
        return Signature(signer, keyed_mac_hex(self._secrets[ident.key_ref], payload))

    def verify(self, signer: str, payload: bytes, sig: Signature) -> bool:
        ident = self._identities.get(signer)
        if ident is None:
            return False
        expected = keyed_mac_hex(self._secrets[ident.key_ref], payload)
        return macs_equal(expected, sig.mac)

    def require_role(self, caller: str, required: Role) -> Identity:
        ident = self._require(caller)
        if ident.role is not required:
            raise MembershipError(
                "ROLE_MISMATCH",
                f"{caller} holds {ident.role.value}, {required.value} required",
            )
        return ident

    def _require(self, identity_id: str) -> Identity:
        ident = self._identities.get(identity_id)
        if ident is None:
            raise MembershipError("UNKNOWN_IDENTITY", f"unknown identity {identity_id!r}")
        return ident

    # -- persistence (demo key vault) ---------------------------------------

    def _save(self) -> None:
        doc = {
            "nextSeq": self._next_seq,
            "identities": [
                {**i.record(), "keyRef": i.key_ref,
                 "secret": self._secrets[i.key_ref].hex()}
                for i in self.identities()
            ],
        }
        tmp = self._path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, indent=1), encoding="utf-8")
        tmp.replace(self._path)

    def _load(self) -> None:
        doc = json.loads(self._path.read_text(encoding="utf-8"))
        self._next_seq = doc["nextSeq"]
        for rec in doc["identities"]:
            ident = Identity(
                rec["identityId"], rec["displayName"], Role(rec["role"]),
                rec["keyRef"], rec["registeredAtSeq"],
            )
            self._identities[ident.identity_id] = ident
            self._secrets[ident.key_ref] = bytes.fromhex(rec["secret"])
