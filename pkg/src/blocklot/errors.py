"""Error types shared across the platform modules.

Every failure carries a stable machine-readable ``code`` (the string the
wire formats, HTTP responses and tests key on) plus a human message.
"""


class BlocklotError(Exception):
    def __init__(self, code: str, message: str = ""):
        super().__init__(message or code)
        self.code = code
        self.message = message or code


class UnsupportedValueError(BlocklotError):
    """A value outside the canonical data model (float, non-string key, ...)."""

    def __init__(self, message: str):
        super().__init__("UNSUPPORTED_VALUE", message)


class MembershipError(BlocklotError):
    """Registration or authorization failure in the identity registry."""


class LedgerError(BlocklotError):
    """Structural ledger failure (bad linkage, corrupt store)."""


class ChaincodeError(BlocklotError):
    """Operation precondition failure; aborts execution with no writes."""


class PipelineError(BlocklotError):
    """Endorsement/ordering failure surfaced to the submitting client."""


class ScenarioParseError(BlocklotError):
    def __init__(self, message: str, where: str = ""):
        super().__init__("SCENARIO_PARSE_ERROR", message)
        self.where = where
