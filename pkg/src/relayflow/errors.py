"""Exception hierarchy shared by all relayflow modules."""

from __future__ import annotations


class RelayFlowError(Exception):
    """Base class for all library errors."""


class InputError(RelayFlowError):
    """Malformed or inconsistent user input (CLI exit code 2)."""


class DomainError(RelayFlowError):
    """Well-formed input on which the requested computation fails (CLI exit code 1)."""


class TooFewLayers(InputError):
    pass


class EmptyLayer(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class BadRange(InputError):
    pass


class RateCountMismatch(InputError):
    pass


class NegativeRate(InputError):
    pass


class OutOfRange(InputError):
    pass


class NonNormalizedPMF(InputError):
    pass


class UnsupportedModel(InputError):
    pass


class TooLarge(RelayFlowError):
    """Enumeration guard tripped (CLI exit code 3)."""


class Infeasible(DomainError):
    pass


class InfeasibleBoundary(DomainError):
    pass


class NumericalFailure(DomainError):
    pass
