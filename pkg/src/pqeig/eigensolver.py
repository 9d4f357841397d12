"""Variational eigensolvers for the coupled system.

The first eigenvalue is the reciprocal of the maximum of the interaction
integral psi over the level set M = {phi = 1}.  Feasibility is exact: the
(p,q)-homogeneous scaling retracts any nonzero state onto M in closed
form, so the solver is a projected ascent with Armijo backtracking and
monotone psi history.

The second eigenvalue is the reciprocal of a sup-min over odd loops on M.
A loop is stored as m states (the other m are their negatives, so the odd
symmetry is exact by construction), relaxed by per-node tangential ascent
with equal-arclength reparametrization (string method), and the worst node
is polished by a Gauss-Newton descent on the squared dual residual.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    Covector,
    DomainError,
    ParameterError,
    Params,
    PreconditionError,
    StartError,
    StateError,
    StateVector,
    homogeneous_scale,
)
from .functionals import (
    dual_solve,
    e_map,
    eigen_residual,
    grad_phi,
    grad_psi,
    hess_phi_vec,
    hess_psi_vec,
    phi,
    psi,
)
from .mesh import Mesh, lumped_integral, state_from_nodal

_MAX_BACKTRACKS = 45


@dataclass
class SolverOptions:
    """Knobs shared by the eigen- and resonance solvers."""

    tol_residual: float = 1e-8
    tol_q_rel: float = 1e-10
    max_iters: int = 3000
    step_init: float = 1.0
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    epsilon_reg: float = 0.0
    seed: int = 0
    n_starts: int = 8
    loop_samples: int = 16
    path_nodes: int = 33

    def __post_init__(self):
        if self.tol_residual <= 0.0 or self.tol_q_rel <= 0.0:
            raise ParameterError("tolerances must be positive")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be at least 1")
        if not 0.0 < self.armijo_c < 1.0:
            raise ParameterError("armijo_c must lie in (0, 1)")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ParameterError("backtrack_factor must lie in (0, 1)")
        if self.step_init <= 0.0:
            raise ParameterError("step_init must be positive")
        if self.epsilon_reg < 0.0:
            raise ParameterError("epsilon_reg must be nonnegative")
        if self.loop_samples < 4:
            raise ParameterError("loop_samples must be at least 4")
        if self.path_nodes < 5:
            raise ParameterError("path_nodes must be at least 5")


@dataclass(frozen=True, eq=False)
class EigenResult:
    """Converged (or best-effort) eigenpair.

    The state is normalized to phi(z) = 1, sign-normalized, and satisfies
    lam = 1/psi(z).  history rows are (iteration, q_value, residual).
    """

    lam: float
    z: StateVector
    residual: float
    iterations: int
    history: tuple
    converged: bool
    message: str = ""


@dataclass(frozen=True, eq=False)
class LoopState:
    """Odd loop of 2m states on M, stored as the first m; negatives are
    materialized on demand so the antipodal symmetry is exact."""

    half: tuple
    min_index: int

    @property
    def points(self) -> tuple:
        return self.half + tuple(-z for z in self.half)

    @property
    def n_points(self) -> int:
        return 2 * len(self.half)


@dataclass(frozen=True)
class SignStructure:
    u_pos: int
    u_neg: int
    v_pos: int
    v_neg: int


@dataclass(frozen=True, eq=False)
class SimplicityReport:
    max_deviation: float
    runs: int
    failures: int
    lambda_spread: float
    lambdas: tuple


def normalize_to_manifold(mesh: Mesh, params: Params, z: StateVector) -> StateVector:
    """Rescale z onto {phi = 1}; exact thanks to degree-one homogeneity."""
    val = phi(mesh, params, z)
    if val == 0.0:
        raise DomainError("cannot normalize the zero state onto the level set")
    return homogeneous_scale(z, 1.0 / val, params)


def canonical_sign(mesh: Mesh, z: StateVector) -> StateVector:
    """Flip component signs so both lumped integrals are nonnegative.

    Componentwise flips stay inside the branch family generated by z, so
    this picks one representative out of the four sign branches.
    """
    u, v = z.u, z.v
    if lumped_integral(mesh, u) < 0.0:
        u = -u
    if lumped_integral(mesh, v) < 0.0:
        v = -v
    return StateVector(u, v)


def default_start(mesh: Mesh) -> StateVector:
    """Positive product-of-linears bump, repeated in both components."""
    x = mesh.vertices
    if mesh.dim == 1:
        top = x[:, 0].max()
        w = x[:, 0] * (top - x[:, 0])
    else:
        lx = x[:, 0].max()
        ly = x[:, 1].max()
        w = x[:, 0] * (lx - x[:, 0]) * x[:, 1] * (ly - x[:, 1])
    return state_from_nodal(mesh, w, w)


def smooth_random_state(mesh: Mesh, rng: np.random.Generator) -> StateVector:
    """Seeded random state smoothed by one stiffness solve per component."""
    xi_u = rng.standard_normal(mesh.n_vertices)
    xi_v = rng.standard_normal(mesh.n_vertices)
    lifted = dual_solve(mesh, Covector(xi_u * mesh.lumped_mass, xi_v * mesh.lumped_mass))
    return state_from_nodal(mesh, lifted.u, lifted.v)


def _ascent_step(mesh, params, z, psi_z, opts, step):
    """One Armijo-backtracked tangential ascent step of psi on M.

    Returns (z_new, psi_new, next_step, moved, residual_sq) where
    residual_sq is the squared dual norm of psi' - psi * phi' at z.
    """
    gpsi = grad_psi(mesh, params, z)
    gphi = grad_phi(mesh, params, z, opts.epsilon_reg)
    r = gpsi - psi_z * gphi
    d = dual_solve(mesh, r)
    res_sq = max(r.pair(d), 0.0)
    d_t = d - gphi.pair(d) * e_map(z, params)
    slope = r.pair(d_t)
    if not np.isfinite(slope) or slope <= 0.0:
        return z, psi_z, step, False, res_sq
    t = step
    step_cap = 1e3 * opts.step_init
    for _ in range(_MAX_BACKTRACKS):
        z_try = normalize_to_manifold(mesh, params, z + t * d_t)
        psi_try = psi(mesh, params, z_try)
        if psi_try >= psi_z + opts.armijo_c * t * slope:
            return z_try, psi_try, min(2.0 * t, step_cap), True, res_sq
        t *= opts.backtrack_factor
    return z, psi_z, t, False, res_sq


def solve_lambda1(
    mesh: Mesh,
    params: Params,
    opts: Optional[SolverOptions] = None,
    z0: Optional[StateVector] = None,
) -> EigenResult:
    """First eigenvalue by projected ascent of psi on {phi = 1}.

    Monotone in psi by the Armijo rule; stops when the dual residual of
    the eigen-equation at lam = 1/psi drops below tol_residual.  On
    failure the best iterate is returned with converged = False rather
    than raising, so parameter sweeps can proceed.
    """
    opts = opts or SolverOptions()
    z = normalize_to_manifold(mesh, params, z0 if z0 is not None else default_start(mesh))
    psi_z = psi(mesh, params, z)
    if psi_z == 0.0:
        raise StartError(
            "starting state has zero interaction integral; "
            "the ascent cannot leave it"
        )
    step = opts.step_init
    history = []
    message = ""
    it = 0
    for it in range(opts.max_iters):
        z_new, psi_new, step, moved, res_sq = _ascent_step(
            mesh, params, z, psi_z, opts, step
        )
        res = float(np.sqrt(res_sq) / psi_z)
        history.append((it, psi_z, res))
        if res <= opts.tol_residual:
            break
        if not moved:
            message = "line search stalled before reaching the residual tolerance"
            break
        z, psi_z = z_new, psi_new
    lam = 1.0 / psi_z
    residual = eigen_residual(mesh, params, z, lam)
    if residual > opts.tol_residual:
        # ascent gains underflow once psi is converged to rounding; a short
        # residual polish closes the gap without touching the ascent history
        z_p, res_p, _, _, _ = _residual_minimize(mesh, params, z, opts, lam=None)
        if res_p < residual:
            z = z_p
    z = canonical_sign(mesh, z)
    z = normalize_to_manifold(mesh, params, z)
    psi_z = psi(mesh, params, z)
    lam = 1.0 / psi_z
    residual = eigen_residual(mesh, params, z, lam)
    converged = residual <= opts.tol_residual
    if converged:
        message = ""
    elif not message:
        message = "iteration limit reached"
    return EigenResult(lam, z, residual, it + 1, tuple(history), converged, message)


def check_sign_structure(mesh: Mesh, z: StateVector) -> SignStructure:
    """Counts of strictly positive / negative interior nodal values."""
    interior = ~mesh.boundary_mask
    return SignStructure(
        u_pos=int(np.sum(z.u[interior] > 0.0)),
        u_neg=int(np.sum(z.u[interior] < 0.0)),
        v_pos=int(np.sum(z.v[interior] > 0.0)),
        v_neg=int(np.sum(z.v[interior] < 0.0)),
    )


# ---------------------------------------------------------------------------
# second eigenvalue: odd-loop string relaxation + residual polish


def second_mode_seed(mesh: Mesh) -> StateVector:
    """Sign-changing sinusoidal state used to open the initial loop."""
    x = mesh.vertices
    if mesh.dim == 1:
        top = x[:, 0].max()
        w = np.sin(2.0 * np.pi * x[:, 0] / top)
    else:
        lx = x[:, 0].max()
        ly = x[:, 1].max()
        w = np.sin(2.0 * np.pi * x[:, 0] / lx) * np.sin(np.pi * x[:, 1] / ly)
    return state_from_nodal(mesh, w, w)


def initial_loop(
    mesh: Mesh,
    params: Params,
    z1: StateVector,
    m: int,
    seed_state: Optional[StateVector] = None,
) -> LoopState:
    """Odd loop through +-z1, opened along a sign-changing perturbation."""
    w = normalize_to_manifold(mesh, params, seed_state or second_mode_seed(mesh))
    half = []
    for j in range(m):
        t = np.pi * j / m
        half.append(
            normalize_to_manifold(
                mesh, params, float(np.cos(t)) * z1 + float(np.sin(t)) * w
            )
        )
    psis = [psi(mesh, params, zj) for zj in half]
    return LoopState(tuple(half), int(np.argmin(psis)))


def _resample_half_chain(mesh, params, half, m):
    """Equal-chord-length resampling of the chain half[0] .. -half[0].

    The closed loop inherits the new spacing by oddness; node 0 is the
    anchor and is left in place.
    """
    chain = list(half) + [-half[0]]
    diffs = [chain[i + 1] - chain[i] for i in range(m)]
    seg = np.array([d.norm() for d in diffs])
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total < 1e-12:
        raise StateError("loop collapsed to a point; cannot reparametrize")
    new_half = [half[0]]
    for k in range(1, m):
        s = total * k / m
        i = int(np.searchsorted(cum, s, side="right") - 1)
        i = min(i, m - 1)
        theta = 0.0 if seg[i] == 0.0 else (s - cum[i]) / seg[i]
        pt = chain[i] + float(theta) * diffs[i]
        new_half.append(normalize_to_manifold(mesh, params, pt))
    return tuple(new_half)


def relax_loop(
    mesh: Mesh,
    params: Params,
    loop: LoopState,
    opts: SolverOptions,
    max_outer: Optional[int] = None,
    patience: int = 12,
):
    """String relaxation: per-node tangential ascent, then reparametrize.

    Every node moves uphill in psi (so the loop minimum is nondecreasing
    up to resampling error) and equal arclength keeps the loop from
    piling up at the maximizers.  Returns the relaxed loop and a history
    of (outer_iteration, min_psi, min_node_residual) rows.
    """
    m = len(loop.half)
    half = list(loop.half)
    steps = [opts.step_init] * m
    history = []
    stall = 0
    prev_min = -np.inf
    max_outer = max_outer if max_outer is not None else opts.max_iters
    for outer in range(max_outer):
        psis = np.array([psi(mesh, params, zj) for zj in half])
        jmin = int(np.argmin(psis))
        pmin = float(psis[jmin])
        if pmin > 0.0:
            res_min = eigen_residual(mesh, params, half[jmin], 1.0 / pmin)
        else:
            res_min = np.inf
        history.append((outer, pmin, res_min))
        if res_min <= opts.tol_residual:
            break
        if pmin - prev_min <= opts.tol_q_rel * max(pmin, 1.0):
            stall += 1
            if stall >= patience:
                break
        else:
            stall = 0
        prev_min = pmin
        for j in range(m):
            half[j], psis[j], steps[j], _, _ = _ascent_step(
                mesh, params, half[j], float(psis[j]), opts, steps[j]
            )
        half = list(_resample_half_chain(mesh, params, half, m))
    psis = [psi(mesh, params, zj) for zj in half]
    return LoopState(tuple(half), int(np.argmin(psis))), history


def _residual_minimize(
    mesh: Mesh,
    params: Params,
    z: StateVector,
    opts: SolverOptions,
    lam: Optional[float] = None,
    max_iters: int = 80,
):
    """Gauss-Newton descent of the squared dual eigen-residual on M.

    With lam fixed this is a monotone minimization of
    S(z) = 0.5 * ||phi'(z) - lam psi'(z)||_*^2; with lam = None the
    multiplier is refreshed to 1/psi(z) after every accepted step
    (Rayleigh-style), which polishes a nearby eigenpair.
    """
    eps = opts.epsilon_reg
    rayleigh = lam is None

    def residual_parts(state, lam_k):
        r = grad_phi(mesh, params, state, eps) - lam_k * grad_psi(mesh, params, state)
        w = dual_solve(mesh, r)
        return r, w, max(r.pair(w), 0.0)

    lam_k = lam
    if rayleigh:
        pz = psi(mesh, params, z)
        if pz <= 0.0:
            return z, np.inf, np.nan, 0, False
        lam_k = 1.0 / pz
    r, w, s2 = residual_parts(z, lam_k)
    best = (z, float(np.sqrt(s2)), lam_k)
    for k in range(max_iters):
        res = float(np.sqrt(s2))
        if res <= opts.tol_residual:
            return z, res, lam_k, k, True
        g_s = hess_phi_vec(mesh, params, z, w, eps) - lam_k * hess_psi_vec(
            mesh, params, z, w
        )
        d = -1.0 * dual_solve(mesh, g_s)
        gphi = grad_phi(mesh, params, z, eps)
        d_t = d - gphi.pair(d) * e_map(z, params)
        slope = g_s.pair(d_t)
        if not np.isfinite(slope) or slope >= 0.0:
            break
        t = 1.0
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            z_try = normalize_to_manifold(mesh, params, z + t * d_t)
            r_try, w_try, s2_try = residual_parts(z_try, lam_k)
            if s2_try <= s2 + opts.armijo_c * t * slope:
                accepted = True
                break
            t *= opts.backtrack_factor
        if not accepted:
            break
        z = z_try
        if rayleigh:
            pz = psi(mesh, params, z)
            if pz <= 0.0:
                break
            lam_k = 1.0 / pz
            r, w, s2 = residual_parts(z, lam_k)
        else:
            r, w, s2 = r_try, w_try, s2_try
        if np.sqrt(s2) < best[1]:
            best = (z, float(np.sqrt(s2)), lam_k)
    z, res, lam_k = best
    return z, res, lam_k, max_iters, res <= opts.tol_residual


def solve_lambda2(
    mesh: Mesh,
    params: Params,
    opts: Optional[SolverOptions] = None,
    lambda1_result: Optional[EigenResult] = None,
) -> EigenResult:
    """Second eigenvalue via the odd-loop sup-min on {phi = 1}.

    The loop is threaded through the first eigenpair and its negative,
    relaxed by the string iteration, and the minimal node is polished to
    an eigenpair by Gauss-Newton on the squared dual residual.
    """
    opts = opts or SolverOptions()
    if lambda1_result is None:
        lambda1_result = solve_lambda1(mesh, params, opts)
    if not lambda1_result.converged:
        raise PreconditionError("first eigenvalue solve did not converge")
    loop = initial_loop(mesh, params, lambda1_result.z, opts.loop_samples)
    loop, history = relax_loop(mesh, params, loop, opts)
    z_min = loop.half[loop.min_index % len(loop.half)]
    z, res, lam, _, polished = _residual_minimize(mesh, params, z_min, opts, lam=None)
    z = normalize_to_manifold(mesh, params, z)
    pz = psi(mesh, params, z)
    if pz <= 0.0:
        return EigenResult(
            np.inf, z, np.inf, len(history), tuple(history), False,
            "loop minimum has zero interaction integral",
        )
    lam = 1.0 / pz
    residual = eigen_residual(mesh, params, z, lam)
    history.append((len(history), pz, residual))
    converged = residual <= opts.tol_residual
    message = "" if converged else "polish did not reach the residual tolerance"
    return EigenResult(
        lam, z, residual, len(history), tuple(history), converged, message
    )


# ---------------------------------------------------------------------------
# evidence checks


def simplicity_check(
    mesh: Mesh, params: Params, opts: Optional[SolverOptions] = None
) -> SimplicityReport:
    """Multi-start agreement check for the first eigenpair.

    Runs the ascent from n_starts seeded random states, maps every
    converged pair to its canonical sign representative, and reports the
    maximum pairwise nodal deviation and the relative eigenvalue spread.
    """
    opts = opts or SolverOptions()
    if opts.n_starts < 1:
        raise ParameterError("n_starts must be at least 1")
    rng = np.random.default_rng(opts.seed)
    reps = []
    lams = []
    failures = 0
    for _ in range(opts.n_starts):
        z0 = smooth_random_state(mesh, rng)
        try:
            result = solve_lambda1(mesh, params, opts, z0)
        except StartError:
            failures += 1
            continue
        if not result.converged:
            failures += 1
            continue
        reps.append(result.z)
        lams.append(result.lam)
    max_dev = 0.0
    for i in range(len(reps)):
        for j in range(i + 1, len(reps)):
            du = np.max(np.abs(reps[i].u - reps[j].u))
            dv = np.max(np.abs(reps[i].v - reps[j].v))
            max_dev = max(max_dev, du, dv)
    spread = 0.0
    if len(lams) > 1:
        spread = (max(lams) - min(lams)) / max(lams)
    return SimplicityReport(max_dev, len(reps), failures, spread, tuple(lams))


def isolation_scan(
    mesh: Mesh,
    params: Params,
    opts: Optional[SolverOptions] = None,
    lambda_max: Optional[float] = None,
    n_grid: int = 10,
    lambda_min: Optional[float] = None,
    lambda1_result: Optional[EigenResult] = None,
    extra_starts: Sequence[StateVector] = (),
    inner_iters: int = 120,
):
    """Residual floor over a grid of trial eigenvalues.

    For each lambda on the grid the squared dual residual is minimized
    over M from several starts; a floor bounded away from zero between
    consecutive eigenvalues is numerical evidence that the interval
    contains no spectrum.  Returns a list of (lambda, min_residual).
    """
    opts = opts or SolverOptions()
    if lambda1_result is None:
        lambda1_result = solve_lambda1(mesh, params, opts)
    lam1 = lambda1_result.lam
    if lambda_max is None or not lambda_max > lam1:
        raise ParameterError("lambda_max must exceed the computed first eigenvalue")
    lo = lam1 if lambda_min is None else float(lambda_min)
    grid = np.linspace(lo, float(lambda_max), int(n_grid))
    rng = np.random.default_rng(opts.seed)
    starts = [lambda1_result.z]
    blend = normalize_to_manifold(
        mesh, params, lambda1_result.z + normalize_to_manifold(mesh, params, second_mode_seed(mesh))
    )
    starts.append(blend)
    starts.append(normalize_to_manifold(mesh, params, smooth_random_state(mesh, rng)))
    starts.extend(extra_starts)
    out = []
    for lam in grid:
        best = np.inf
        for z0 in starts:
            _, res, _, _, _ = _residual_minimize(
                mesh, params, z0, opts, lam=float(lam), max_iters=inner_iters
            )
            best = min(best, res)
        out.append((float(lam), float(best)))
    return out
