"""Common exception hierarchy."""


class GasnetError(Exception):
    """Base class for all errors raised by this package."""


class ScenarioError(GasnetError):
    """Malformed or inconsistent scenario document."""
