"""Exception taxonomy shared by all ietlab modules.

Every anticipated failure mode gets its own class so callers (and the CLI
exit-code mapping) can tell domain errors, degenerate inputs, and config
problems apart without string matching.
"""


class IetLabError(Exception):
    """Base class for all ietlab-specific errors."""


class NonPositiveLength(IetLabError):
    """An interval length is zero, negative, or not finite."""


class ReduciblePermutation(IetLabError):
    """The permutation fixes a proper prefix {1..k}, k < d; the exchange
    splits into independent pieces and is rejected."""


class OutOfDomain(IetLabError):
    """A point lies outside the half-open unit interval [0, 1)."""


class IncompatiblePartition(IetLabError):
    """A piecewise function does not match the exchange it is used with."""


class KeaneDegenerate(IetLabError):
    """Renormalization hit a tie between the two candidate lengths, or the
    input is too close to rational dependence for the requested depth."""


class BlockOverflow(IetLabError):
    """An accelerated renormalization block exceeded the step budget."""


class NoSecondExponent(IetLabError):
    """The estimated spectral gap leaves no usable second expanding
    direction (always the case for 2-interval exchanges)."""


class DimensionMismatch(IetLabError):
    """A vector's length does not match the number of intervals."""


class NonZeroMean(IetLabError):
    """An observable that must be mean-free has a nonzero average."""


class EmptySample(IetLabError):
    """An empirical distribution was requested from zero samples."""


class DegenerateVariance(IetLabError):
    """Sample variance too small to standardize (below 1e-24)."""


class DegenerateObservable(IetLabError):
    """The observable's orbit sums stay bounded; no growing component."""


class ConfigError(IetLabError):
    """An experiment configuration file is missing, malformed, or invalid."""
