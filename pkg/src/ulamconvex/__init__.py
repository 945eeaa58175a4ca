"""Ulam's method for invariant densities of piecewise convex interval maps
with countably many branches.

Typical pipeline::

    from ulamconvex import catalog, truncate, ulam_matrix, stationary_density, l1_vs_exact

    tau = catalog.example1()
    M = ulam_matrix(truncate(tau, 10).spec, k=1000)
    f = stationary_density(M).density
    l1_vs_exact(f, catalog.EXAMPLE1_DENSITY)   # ~0.1335
"""

from . import catalog, dsl
from .analysis import SweepRow, fp_residual, l1_between, l1_vs_exact, sweep
from .errors import *  # noqa: F401,F403
from .map_model import (
    Branch,
    BranchFamily,
    LYConstants,
    MapClass,
    MapSpec,
    ValidationReport,
    branch_inverse,
    eval_map,
    ly_constants,
    validate,
)
from .orbit import OrbitHistogram, birkhoff_density, orbit_histogram
from .solver import Method, SolveReport, stationary_density
from .truncation import TruncatedMap, almost_uniform_gap, truncate
from .ulam import (
    DensityVector,
    PartitionGrid,
    UlamMatrix,
    apply_operator,
    project_Q,
    transfer_pointwise,
    ulam_matrix,
)

__version__ = "0.1.0"
