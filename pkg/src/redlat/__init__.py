"""Reduced fast CBC/SCS construction of rank-1 (polynomial) lattice rules.

Builds generating vectors whose per-coordinate search spaces shrink with
the weight decay of the target function space, evaluates worst-case
integration errors in weighted Korobov and Walsh spaces, and ships a CLI
for convergence, timing, and multi-seed experiments.
"""

__version__ = "0.1.0"

from .construct import (
    ConstructionConfig,
    ConstructionResult,
    exhaustive_best,
    naive_scs,
    reduced_fast_cbc,
    reduced_fast_scs,
    verify_monotonicity,
)
from .errors import ConfigError, GuardError, NumericsError, RedlatError, SmoothnessError
from .kernels import BACKEND, HAVE_NUMBA
from .polylattice import (
    PolyConstructionResult,
    PolyGF,
    PolyGeneratingVector,
    mu_b,
    nu,
    plr_points,
    poly_add,
    poly_is_unit_mod_xm,
    poly_mul_mod_xm,
    reduced_scs_poly,
    scs_error_bound_poly,
    trm,
    walsh_kernel,
    walsh_wal,
    wce_walsh_dual_oracle,
    wce_walsh_product,
)
from .spaces import (
    GeneralWeights,
    GeneratingVector,
    ProductWeights,
    ReductionSchedule,
    SpaceParams,
    corollary_constant,
    lattice_points,
    omega,
    reduced_search_space,
    scs_error_bound,
    sobolev_weight_map,
    sstar,
    tent,
    wce_dual_oracle,
    wce_product,
)
from .spectral import CirculantOperator, OpCounter, circulant_matvec, forward_transform, inverse_transform, reduced_matvec
from .unitgroup import (
    BlockDecomposition,
    HalfGroupOrdering,
    assemble_reduced_matrix,
    half_group,
    primitive_root,
    reorder_decomposition,
)
