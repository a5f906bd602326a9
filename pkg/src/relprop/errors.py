"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: usage errors exit 1,
model/data errors exit 2, numerical failures exit 3.
"""


class RelpropError(Exception):
    """Base class for all package errors."""


class UsageError(RelpropError):
    """Invalid arguments or option combinations."""


class ModelFormatError(RelpropError):
    """Malformed or inconsistent model manifest / weight blob."""


class DataError(RelpropError):
    """Unreadable or invalid images, dataset manifests, or annotations."""


class NumericalError(RelpropError):
    """Non-finite intermediates or failed numerical diagnostics."""
