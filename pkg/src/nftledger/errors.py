"""Exception hierarchy shared by every nftledger module."""


class NftLedgerError(Exception):
    """Base class for all errors raised by nftledger."""


class ManifestError(NftLedgerError):
    pass


class SchemaError(NftLedgerError):
    """Input stream is unreadable or its header does not match the format."""


class TraitConflictError(NftLedgerError):
    pass


class FlagMismatchError(NftLedgerError):
    pass


class NoSalesError(NftLedgerError):
    """Raised when a token has no transactions to analyse."""


class UnknownTokenError(NftLedgerError):
    pass


class UndefinedSlopeError(NftLedgerError):
    pass


class InsufficientDataError(NftLedgerError):
    pass


class CircuitBudgetExceeded(NftLedgerError):
    def __init__(self, budget: int):
        super().__init__(f"circuit budget exceeded ({budget} circuits)")
        self.budget = budget


class InvalidPriceError(NftLedgerError):
    pass
