"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class ConfigurationError(ValueError):
    """A configuration is inconsistent (bad schema value, pilot budget, ...)."""
