"""Computational toolkit for weighted Hardy-type splitting on the 2-torus.

Submodules:
  torus     grids, spectra, Poisson smoothing, weighted norms, TORUS v1 files
  spectral  Hilbert transform, Riesz and cone projectors, framed operators
  weights   Muckenhoupt / reverse-Holder / BMO estimators, weight transforms
  analytic  outer functions, inner-outer factorization, partitions of unity
  czd       weighted Calderon-Zygmund decomposition on circle fibers
  engine    the constructive splitting pipeline and gluing driver
  oracle    brute-force near-optimal splitting constants on small grids
  cli       batch experiment runner (CSV + report + figure artifacts)
"""

from .torus import (
    Grid1D,
    TorusFn1D,
    TorusFn2D,
    from_spectrum,
    poisson_convolve,
    read_torus,
    to_spectrum,
    weighted_norm,
    write_torus,
)
from .spectral import (
    CONES,
    LOWER_STRICT,
    QUADRANT,
    RIGHT_HALF,
    TOP_HALF,
    UNION_CONE,
    framed_project,
    hilbert,
    membership,
    project_cone,
    riesz,
)
from .weights import (
    Weight1D,
    Weight2D,
    a1_constant,
    ap_constant,
    bmo_norm,
    dual_weights,
    dyadic_family,
    glue_weight,
    hypothesis_check,
    reverse_holder_constant,
    single_weight_reduction,
    uniform_fiber_constant,
    weight_from_spec,
)
from .analytic import OuterFn, Partition, build_partition, inner_outer, outer_function
from .czd import CZResult, cz_decompose, cz_tail_check
from .engine import (
    SplitConfig,
    SplitReport,
    correctors,
    gimel,
    glue_driver,
    lambda_levels,
    majorant,
    split_fiberwise,
    split_inf,
)
from .oracle import OracleProblem, OracleResult, kconstant_sweep, solve_convex, solve_heuristic

__version__ = "0.1.0"
