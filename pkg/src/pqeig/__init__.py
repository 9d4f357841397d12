"""Solvers for a coupled (p,q)-Laplacian eigenvalue system and for the
associated resonant problem under limit-integral solvability conditions."""

from .core import (
    Covector,
    DomainError,
    ParameterError,
    Params,
    PQError,
    PreconditionError,
    ShapeError,
    StartError,
    StateError,
    StateVector,
    homogeneous_scale,
    sign_branch,
)
from .eigensolver import (
    EigenResult,
    LoopState,
    SolverOptions,
    check_sign_structure,
    isolation_scan,
    normalize_to_manifold,
    simplicity_check,
    solve_lambda1,
    solve_lambda2,
)
from .functionals import (
    ResonantData,
    dual_norm,
    dual_solve,
    e_map,
    eigen_residual,
    grad_j,
    grad_phi,
    grad_psi,
    j_value,
    phi,
    psi,
    rayleigh_q,
)
from .mesh import (
    Mesh,
    build_interval_mesh,
    build_rect_mesh,
    gradient_field,
    integrate_elementwise,
    lumped_integral,
    state_from_nodal,
)
from .picone import PiconeField, picone_fields, verify_picone
from .resonance import (
    LLReport,
    NonlinearitySpec,
    arctan_sum,
    ll_classify,
    normalize_eigenpair_unitnorm,
    solve_coercive,
    solve_saddle,
    zero_nonlinearity,
)

__version__ = "0.1.0"
