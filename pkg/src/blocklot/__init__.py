"""Permissioned ledger for tracking and auctioning non-fungible commodities.

Subsystems: membership (identities and demo signatures), ledger (hash
chain, world state, MVCC validation), chaincode (the auction operations),
pipeline (execute-order-validate simulation), scenario (deterministic
replays), service/api (HTTP platform), cli (operator entry point).
"""

from .canonical import KERNEL, canonical_serialize
from .errors import (
    BlocklotError,
    ChaincodeError,
    LedgerError,
    MembershipError,
    PipelineError,
    ScenarioParseError,
    UnsupportedValueError,
)
from .membership import Identity, MembershipRegistry, Role, Signature

__version__ = "0.1.0"

__all__ = [
    "BlocklotError",
    "ChaincodeError",
    "Identity",
    "KERNEL",
    "LedgerError",
    "MembershipError",
    "MembershipRegistry",
    "PipelineError",
    "Role",
    "ScenarioParseError",
    "Signature",
    "UnsupportedValueError",
    "canonical_serialize",
    "__version__",
]
