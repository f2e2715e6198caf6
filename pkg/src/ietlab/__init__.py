"""Numerical laboratory for interval exchange maps, their renormalization
cocycles, suspension flows, and the distribution behavior of orbit sums."""

__version__ = "0.1.0"

from .errors import (
    BlockOverflow,
    ConfigError,
    DegenerateObservable,
    DegenerateVariance,
    DimensionMismatch,
    EmptySample,
    IetLabError,
    IncompatiblePartition,
    KeaneDegenerate,
    NonPositiveLength,
    NonZeroMean,
    NoSecondExponent,
    OutOfDomain,
    ReduciblePermutation,
)
from .iet import (
    Iet,
    PiecewiseFunction,
    birkhoff_sum,
    make_iet,
    mean_value,
    sample_points,
)
from .metrics import EmpiricalDistribution, d_kr, d_lp, empirical, standardize
from .rauzy import (
    DegeneracyReport,
    OseledetsFrame,
    RauzyStep,
    ZorichBlock,
    cocycle_function,
    cocycle_orbit,
    degeneracy_index,
    rauzy_step,
    second_direction,
    zorich_block,
)
from .suspension import (
    SurfacePoint,
    Suspension,
    canonical_suspension,
    density_field,
    ergodic_integral,
    flow,
    from_heights,
    make_psi,
    return_time,
    weak_lip_bound,
)
from .towers import Tower, build_tower, walk_steps, walk_time

__all__ = [
    "__version__",
    "Iet", "PiecewiseFunction", "make_iet", "mean_value", "birkhoff_sum",
    "sample_points",
    "Tower", "build_tower", "walk_steps", "walk_time",
    "RauzyStep", "ZorichBlock", "OseledetsFrame", "DegeneracyReport",
    "rauzy_step", "zorich_block", "cocycle_orbit", "second_direction",
    "cocycle_function", "degeneracy_index",
    "Suspension", "SurfacePoint", "canonical_suspension", "from_heights",
    "make_psi", "flow", "return_time", "ergodic_integral", "density_field",
    "weak_lip_bound",
    "EmpiricalDistribution", "empirical", "standardize", "d_kr", "d_lp",
    "IetLabError", "NonPositiveLength", "ReduciblePermutation",
    "OutOfDomain", "IncompatiblePartition", "KeaneDegenerate",
    "BlockOverflow", "NoSecondExponent", "DimensionMismatch", "NonZeroMean",
    "EmptySample", "DegenerateVariance", "DegenerateObservable",
    "ConfigError",
]
