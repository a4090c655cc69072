"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when an input, a config field, or a file fails validation."""


class DomainError(ValueError):
    """Raised when a value lies outside an operation's mathematical domain."""


class DebtNeverClearsError(DomainError):
    """Raised when a payment schedule can never amortize the balance."""
