"""dimlab: dimension theory of piecewise-expanding interval maps, made computable.

The package models interval maps with finitely many full branches (possibly
with parabolic fixed points, e.g. the Manneville map), enumerates symbolic
cylinders, evaluates pressure sums and Bowen roots for Hausdorff-dimension
estimates, builds Moran schemes with product measures, and cross-checks the
dimension formula h/lambda against closed-form oracles.
"""

from . import errors
from .map_model import (
    BranchSpec,
    IntervalMap,
    cantor_2_4,
    doubling,
    eval_derivative,
    eval_map,
    find_fixed_points,
    from_config,
    inverse_branch,
    linear_map,
    load_map,
    manneville,
    middle_thirds,
    two_parabolic,
)
from .symbolic import (
    Cylinder,
    Word,
    birkhoff_average,
    cylinder,
    diameter_average_gap,
    enumerate_cylinders,
    variation,
    word_orbit,
    word_point,
)

__version__ = "0.1.0"
