"""Projective Wishart distributions on unit-determinant positive definite matrices."""

__version__ = "0.1.0"

from .densities import (  # noqa: E402
    RadialLaw,
    normalize_density_2d,
    projective_logdensity_cosh,
    projective_logdensity_trace,
    radial_law,
    wishart_logdensity_invariant,
)
from .frechet import MeanConfig, MeanResult, equivariance_check, frechet_objective, karcher_mean  # noqa: E402
from .geometry import (  # noqa: E402
    DEFAULT_SCALE,
    TangentVec,
    distance,
    distance_to_identity_eigen,
    exp_map,
    group_act,
    log_map,
    project,
    theta,
    theta_inverse,
)
from .rng import RngStream  # noqa: E402
from .sampling import (  # noqa: E402
    WishartParams,
    conjugate_stabilizer,
    sample_gaussian,
    sample_projective_wishart,
    sample_stabilizer,
    sample_wishart,
)
