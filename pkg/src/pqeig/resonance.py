"""Resonant system around the first eigenvalue.

A nonlinearity is a bundle of vectorized callables (value, both partial
derivatives, a uniform derivative bound) plus the eight limit functions of
the partials at the four sign-infinity quadrants.  The classifier compares
the limit integrals against the forcing integrals, in the strict-inequality
form that depends on the ordering of p and q, and labels the regime:

* ``coercive``: the resonant energy j grows at infinity, so a global
  minimizer solves the system; found by preconditioned Armijo descent.
* ``saddle``: j drops to -infinity along the four scaled sign branches of
  the first eigenpair but stays bounded below on {phi >= lambda2 psi};
  a solution is found as a path minimax between far-out branch points,
  with a Gauss-Newton polish of the maximal path node.
* ``none``: neither set of strict inequalities holds.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    Covector,
    DomainError,
    ParameterError,
    Params,
    PreconditionError,
    StateError,
    StateVector,
    homogeneous_scale,
    sign_branch,
)
from .eigensolver import EigenResult, SolverOptions, _MAX_BACKTRACKS
from .functionals import (
    ResonantData,
    dual_norm,
    dual_solve,
    grad_j,
    j_value,
    phi,
    phi_hessian_blocks,
    psi,
    psi_hessian_diags,
)
from .mesh import Mesh, gradient_field, integrate_elementwise, lumped_integral

Limit = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class NonlinearitySpec:
    """Bounded-derivative nonlinearity with its sign-infinity limits.

    All callables are vectorized over the vertex coordinate array x of
    shape (nv, dim); f, f_s, f_t additionally take nodal arrays (s, t).
    The limit naming follows the quadrant of (s, t): ``fs_pm`` is the
    limit of f_s as s -> +inf, t -> -inf, and so on.
    """

    f: Callable
    f_s: Callable
    f_t: Callable
    bound_m: float
    fs_pp: Limit
    fs_pm: Limit
    fs_mp: Limit
    fs_mm: Limit
    ft_pp: Limit
    ft_pm: Limit
    ft_mp: Limit
    ft_mm: Limit
    name: str = ""


def _const(value: float) -> Limit:
    def limit(x: np.ndarray) -> np.ndarray:
        return np.full(np.asarray(x).shape[0], value)

    return limit


def zero_nonlinearity() -> NonlinearitySpec:
    """F identically zero (plain resonant eigen-identity)."""

    def zero(x, s, t):
        return np.zeros(np.asarray(s).shape)

    z = _const(0.0)
    return NonlinearitySpec(zero, zero, zero, 0.0, z, z, z, z, z, z, z, z, name="zero")


def arctan_sum(a: float, b: float) -> NonlinearitySpec:
    """F(x, s, t) = a g(s) + b g(t) with g(s) = s arctan(s) - ln(1+s^2)/2.

    g' = arctan, so both partials are bounded by pi/2 times the
    coefficients and the limit functions are the constants
    +-a pi/2 (depending on the sign of s) and +-b pi/2 (sign of t).
    """

    def f(x, s, t):
        s = np.asarray(s)
        t = np.asarray(t)
        return a * (s * np.arctan(s) - 0.5 * np.log1p(s * s)) + b * (
            t * np.arctan(t) - 0.5 * np.log1p(t * t)
        )

    def f_s(x, s, t):
        return a * np.arctan(np.asarray(s)) * np.ones_like(np.asarray(t), dtype=float)

    def f_t(x, s, t):
        return b * np.arctan(np.asarray(t)) * np.ones_like(np.asarray(s), dtype=float)

    half_pi = 0.5 * np.pi
    return NonlinearitySpec(
        f,
        f_s,
        f_t,
        bound_m=max(abs(a), abs(b)) * half_pi,
        fs_pp=_const(a * half_pi),
        fs_pm=_const(a * half_pi),
        fs_mp=_const(-a * half_pi),
        fs_mm=_const(-a * half_pi),
        ft_pp=_const(b * half_pi),
        ft_pm=_const(-b * half_pi),
        ft_mp=_const(b * half_pi),
        ft_mm=_const(-b * half_pi),
        name="arctan_sum",
    )


FAMILIES = {
    "zero": lambda **kw: zero_nonlinearity(),
    "arctan_sum": lambda a=1.0, b=1.0, **kw: arctan_sum(a, b),
}


def spot_check_nonlinearity(
    spec: NonlinearitySpec,
    x: np.ndarray,
    rng: np.random.Generator,
    n_samples: int = 64,
    big: float = 1e6,
    limit_tol: float = 1e-3,
) -> dict:
    """Randomized consistency checks: derivative bound and quadrant limits.

    Samples |f_s|, |f_t| on random (s, t) and compares the partials at
    (+-big, +-big) against the declared limit functions.  Evidence, not
    proof.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    s = rng.uniform(-1e4, 1e4, size=(n_samples, n))
    t = rng.uniform(-1e4, 1e4, size=(n_samples, n))
    max_fs = max(float(np.max(np.abs(spec.f_s(x, s[i], t[i])))) for i in range(n_samples))
    max_ft = max(float(np.max(np.abs(spec.f_t(x, s[i], t[i])))) for i in range(n_samples))
    bound_ok = max_fs <= spec.bound_m + 1e-12 and max_ft <= spec.bound_m + 1e-12

    ones = np.ones(n)
    gaps = []
    for ss, tt, fs_lim, ft_lim in (
        (big, big, spec.fs_pp, spec.ft_pp),
        (big, -big, spec.fs_pm, spec.ft_pm),
        (-big, big, spec.fs_mp, spec.ft_mp),
        (-big, -big, spec.fs_mm, spec.ft_mm),
    ):
        gaps.append(float(np.max(np.abs(spec.f_s(x, ss * ones, tt * ones) - fs_lim(x)))))
        gaps.append(float(np.max(np.abs(spec.f_t(x, ss * ones, tt * ones) - ft_lim(x)))))
    limits_ok = max(gaps) <= limit_tol
    return {
        "bound_ok": bound_ok,
        "limits_ok": limits_ok,
        "max_abs_fs": max_fs,
        "max_abs_ft": max_ft,
        "max_limit_gap": max(gaps),
    }


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True, eq=False)
class LLReport:
    """Limit-integral comparison report.

    ``integrals`` holds the eight limit integrals against the normalized
    eigenpair plus the two forcing integrals; holds_7 .. holds_12 are the
    strict-inequality bundles of the case matching the ordering of p and
    q (the other four are False).  ``margin`` is the smallest strict gap
    of the winning bundle (or of the nearest bundle when regime is
    ``none``); ``borderline`` flags a margin within quadrature noise.
    """

    integrals: dict
    holds_7: bool
    holds_8: bool
    holds_9: bool
    holds_10: bool
    holds_11: bool
    holds_12: bool
    regime: str
    case: str
    margin: float
    borderline: bool


def normalize_eigenpair_unitnorm(mesh: Mesh, params: Params, eig: EigenResult) -> StateVector:
    """Rescale an eigenpair so the summed gradient seminorm powers equal 1.

    Both terms are linear in the scaling parameter, so the normalization
    solves a single linear equation and stays inside the eigenfunction
    branch family.
    """
    z = eig.z
    gu = gradient_field(mesh, z.u)
    gv = gradient_field(mesh, z.v)
    a = integrate_elementwise(mesh, np.einsum("ei,ei->e", gu, gu) ** (0.5 * params.p))
    b = integrate_elementwise(mesh, np.einsum("ei,ei->e", gv, gv) ** (0.5 * params.q))
    total = a + b
    if total == 0.0:
        raise DomainError("cannot normalize the zero eigenpair")
    return homogeneous_scale(z, 1.0 / total, params)


def _strict_chain(*gaps: float) -> tuple[bool, float]:
    margin = min(gaps)
    return margin > 0.0, margin


def ll_classify(
    mesh: Mesh,
    params: Params,
    spec: NonlinearitySpec,
    h1: np.ndarray,
    h2: np.ndarray,
    eigenpair: StateVector,
    warn_band: float = 1e-10,
) -> LLReport:
    """Classify the resonance regime from the limit integrals.

    ``eigenpair`` must be the unit-seminorm normalized positive first
    eigenpair; all ten integrals use the same lumped quadrature, and the
    inequalities are evaluated as exact strict comparisons.  Equality
    within ``warn_band`` (times the integral scale) of failing is
    reported as regime ``none`` with ``borderline`` set.
    """
    x = mesh.vertices
    phi1, psi1 = eigenpair.u, eigenpair.v
    ints = {
        "fs_pp": lumped_integral(mesh, spec.fs_pp(x) * phi1),
        "fs_pm": lumped_integral(mesh, spec.fs_pm(x) * phi1),
        "fs_mp": lumped_integral(mesh, spec.fs_mp(x) * phi1),
        "fs_mm": lumped_integral(mesh, spec.fs_mm(x) * phi1),
        "ft_pp": lumped_integral(mesh, spec.ft_pp(x) * psi1),
        "ft_pm": lumped_integral(mesh, spec.ft_pm(x) * psi1),
        "ft_mp": lumped_integral(mesh, spec.ft_mp(x) * psi1),
        "ft_mm": lumped_integral(mesh, spec.ft_mm(x) * psi1),
        "h1_phi1": lumped_integral(mesh, np.asarray(h1, dtype=float) * phi1),
        "h2_psi1": lumped_integral(mesh, np.asarray(h2, dtype=float) * psi1),
    }
    h1i, h2i = ints["h1_phi1"], ints["h2_psi1"]
    holds = {k: False for k in (7, 8, 9, 10, 11, 12)}

    if params.p < params.q:
        case = "p<q"
        first, m1 = _strict_chain(
            h1i - ints["fs_pp"], ints["fs_mm"] - h1i,
            h1i - ints["fs_pm"], ints["fs_mp"] - h1i,
        )
        second, m2 = _strict_chain(
            h1i - ints["fs_mm"], ints["fs_pp"] - h1i,
            h1i - ints["fs_mp"], ints["fs_pm"] - h1i,
        )
        holds[7], holds[8] = first, second
    elif params.p == params.q:
        case = "p=q"
        s_sum = h1i + h2i
        s_dif = h1i - h2i
        first, m1 = _strict_chain(
            s_sum - (ints["fs_pp"] + ints["ft_pp"]),
            (ints["fs_mm"] + ints["ft_mm"]) - s_sum,
            s_dif - (ints["fs_pm"] - ints["ft_pm"]),
            (ints["fs_mp"] - ints["ft_mp"]) - s_dif,
        )
        second, m2 = _strict_chain(
            s_sum - (ints["fs_mm"] + ints["ft_mm"]),
            (ints["fs_pp"] + ints["ft_pp"]) - s_sum,
            s_dif - (ints["fs_mp"] - ints["ft_mp"]),
            (ints["fs_pm"] - ints["ft_pm"]) - s_dif,
        )
        holds[9], holds[10] = first, second
    else:
        case = "p>q"
        first, m1 = _strict_chain(
            h2i - ints["ft_pp"], ints["ft_mm"] - h2i,
            h2i - ints["ft_mp"], ints["ft_pm"] - h2i,
        )
        second, m2 = _strict_chain(
            h2i - ints["ft_mm"], ints["ft_pp"] - h2i,
            h2i - ints["ft_pm"], ints["ft_mp"] - h2i,
        )
        holds[11], holds[12] = first, second

    if first:
        regime, margin = "coercive", m1
    elif second:
        regime, margin = "saddle", m2
    else:
        regime, margin = "none", max(m1, m2)
    scale = max(1.0, max(abs(v) for v in ints.values()))
    borderline = regime == "none" and margin > -warn_band * scale
    return LLReport(
        integrals=ints,
        holds_7=holds[7],
        holds_8=holds[8],
        holds_9=holds[9],
        holds_10=holds[10],
        holds_11=holds[11],
        holds_12=holds[12],
        regime=regime,
        case=case,
        margin=margin,
        borderline=borderline,
    )


# ---------------------------------------------------------------------------
# coercive solve


@dataclass(frozen=True, eq=False)
class CoerciveSolveResult:
    z: StateVector
    j: float
    residual: float
    converged: bool
    iterations: int
    history: tuple
    start_label: str = ""
    message: str = ""


def _descend_j(mesh, params, data, z, opts, max_iters):
    """Armijo descent of j from z; history is the nonincreasing j values."""
    jz = j_value(mesh, params, z, data)
    history = [jz]
    step = opts.step_init
    it = 0
    for it in range(max_iters):
        g = grad_j(mesh, params, z, data, opts.epsilon_reg)
        d = -1.0 * dual_solve(mesh, g)
        slope = g.pair(d)
        res = float(np.sqrt(max(0.0, -slope)))
        if res <= opts.tol_residual:
            return z, jz, res, it, True, history
        if not np.isfinite(slope) or slope >= 0.0:
            break
        t = step
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            z_try = z + t * d
            j_try = j_value(mesh, params, z_try, data)
            if np.isfinite(j_try) and j_try <= jz + opts.armijo_c * t * slope:
                accepted = True
                break
            t *= opts.backtrack_factor
        if not accepted:
            break
        z, jz = z_try, j_try
        history.append(jz)
        step = min(2.0 * t, 1e3 * opts.step_init)
    g = grad_j(mesh, params, z, data, opts.epsilon_reg)
    res = dual_norm(mesh, g)
    return z, jz, res, it + 1, res <= opts.tol_residual, history


def solve_coercive(
    mesh: Mesh,
    params: Params,
    spec: NonlinearitySpec,
    h1: np.ndarray,
    h2: np.ndarray,
    lambda1_result: EigenResult,
    opts: Optional[SolverOptions] = None,
) -> CoerciveSolveResult:
    """Global minimization of the resonant energy (coercive regime).

    Runs Armijo descent from the zero state and from the two signs of the
    first eigenpair, returning the best converged candidate.  A regime
    other than coercive only triggers a warning: descent is still a
    well-defined local solver.
    """
    opts = opts or SolverOptions()
    data = ResonantData(spec, h1, h2, lambda1=lambda1_result.lam)
    pair1 = normalize_eigenpair_unitnorm(mesh, params, lambda1_result)
    report = ll_classify(mesh, params, spec, h1, h2, pair1)
    if report.regime != "coercive":
        warnings.warn(
            f"limit-integral classification is '{report.regime}', not 'coercive'; "
            "descent may not find a global minimizer",
            stacklevel=2,
        )
    starts = [
        ("zero", StateVector.zeros(mesh.n_vertices)),
        ("+eigenpair", lambda1_result.z),
        ("-eigenpair", -lambda1_result.z),
    ]
    best = None
    for label, z0 in starts:
        z, jz, res, iters, ok, hist = _descend_j(mesh, params, data, z0, opts, opts.max_iters)
        cand = CoerciveSolveResult(z, jz, res, ok, iters, tuple(hist), label)
        if best is None or (cand.converged, -cand.j) > (best.converged, -best.j):
            best = cand
    if not best.converged:
        best = CoerciveSolveResult(
            best.z, best.j, best.residual, False, best.iterations,
            best.history, best.start_label,
            "no start reached the residual tolerance; best iterate returned",
        )
    return best


# ---------------------------------------------------------------------------
# saddle solve


@dataclass(frozen=True, eq=False)
class SaddleSolveResult:
    z: StateVector
    j: float
    residual: float
    converged: bool
    iterations: int
    history: tuple
    theta_big: float
    branch_values: tuple
    branch_decreasing: bool
    gamma_endpoints: float
    lambda2_cross_min: float
    message: str = ""


def choose_theta_big(
    mesh: Mesh,
    params: Params,
    data: ResonantData,
    pair1: StateVector,
    cap: float = 2.0**20,
) -> float:
    """Smallest power-of-two scaling at which all four branch samples of j
    sit below j(0) - 1."""
    j0 = j_value(mesh, params, StateVector.zeros(mesh.n_vertices), data)
    theta = 1.0
    while theta <= cap:
        values = [
            j_value(mesh, params, sign_branch(pair1, s * theta, params, branch), data)
            for s in (1.0, -1.0)
            for branch in (1, 2)
        ]
        if max(values) < j0 - 1.0:
            return theta
        theta *= 2.0
    raise StateError(
        "no branch scaling up to 2^20 pushed the energy below j(0) - 1; "
        "the classified regime may not be saddle"
    )


def _branch_samples(mesh, params, data, pair1, theta):
    """j at the four sign branches for |theta|, 2|theta|, 4|theta|."""
    rows = []
    for s, branch in ((1.0, 1), (-1.0, 1), (1.0, 2), (-1.0, 2)):
        rows.append(
            tuple(
                j_value(
                    mesh, params, sign_branch(pair1, s * theta * mult, params, branch), data
                )
                for mult in (1.0, 2.0, 4.0)
            )
        )
    return tuple(rows)


def _fd_grad_j_direction(mesh, params, z, data, w, opts):
    """Directional derivative of grad_j along w by central differences."""
    scale = 1e-6 * (1.0 + z.norm()) / max(w.norm(), 1e-30)
    gp = grad_j(mesh, params, z + scale * w, data, opts.epsilon_reg)
    gm = grad_j(mesh, params, z - scale * w, data, opts.epsilon_reg)
    return (1.0 / (2.0 * scale)) * (gp - gm)


def _j_hessian_interior(mesh, params, data, z, opts):
    """Sparse Hessian of the resonant energy on the interior dofs.

    The energy blocks are assembled analytically; the nonlinearity blocks
    are vertex-diagonal and come from central differences of the bounded
    partials, which is cheap and does not require second derivatives in
    the nonlinearity bundle.
    """
    import scipy.sparse as sp

    lam1 = float(data.lambda1)
    hu, hv = phi_hessian_blocks(mesh, params, z, opts.epsilon_reg)
    d11, d12, d22 = psi_hessian_diags(mesh, params, z)
    x = mesh.vertices
    m = mesh.lumped_mass
    du = 1e-6 * (1.0 + np.abs(z.u))
    dv = 1e-6 * (1.0 + np.abs(z.v))
    fss = (data.nonlinearity.f_s(x, z.u + du, z.v) - data.nonlinearity.f_s(x, z.u - du, z.v)) / (2.0 * du)
    fst = (data.nonlinearity.f_s(x, z.u, z.v + dv) - data.nonlinearity.f_s(x, z.u, z.v - dv)) / (2.0 * dv)
    ftt = (data.nonlinearity.f_t(x, z.u, z.v + dv) - data.nonlinearity.f_t(x, z.u, z.v - dv)) / (2.0 * dv)
    auu = np.asarray(-lam1 * d11 - m * fss)
    auv = np.asarray(-lam1 * d12 - m * fst)
    avv = np.asarray(-lam1 * d22 - m * ftt)
    idx = mesh.interior
    blk_uu = hu[idx][:, idx] + sp.diags(auu[idx])
    blk_vv = hv[idx][:, idx] + sp.diags(avv[idx])
    blk_uv = sp.diags(auv[idx])
    return sp.bmat([[blk_uu, blk_uv], [blk_uv, blk_vv]]).tocsc()


def _newton_polish(mesh, params, data, z, opts, max_iters=40):
    """Damped Newton iteration on grad_j = 0 from a near-critical start.

    Accepts a (possibly halved) Newton step whenever it reduces the dual
    residual; quadratic near a nondegenerate critical point of any index,
    which is what the path maximum approaches.
    """
    import scipy.sparse.linalg as spla

    idx = mesh.interior
    g = grad_j(mesh, params, z, data, opts.epsilon_reg)
    res = dual_norm(mesh, g)
    for k in range(max_iters):
        if res <= opts.tol_residual:
            return z, res, k, True
        try:
            hmat = _j_hessian_interior(mesh, params, data, z, opts)
            rhs = -np.concatenate([g.du[idx], g.dv[idx]])
            delta = spla.splu(hmat).solve(rhs)
        except RuntimeError:
            break
        if not np.all(np.isfinite(delta)):
            break
        du = np.zeros(mesh.n_vertices)
        dv = np.zeros(mesh.n_vertices)
        du[idx] = delta[: idx.size]
        dv[idx] = delta[idx.size :]
        step = StateVector(du, dv)
        t = 1.0
        improved = False
        for _ in range(12):
            z_try = z + t * step
            g_try = grad_j(mesh, params, z_try, data, opts.epsilon_reg)
            res_try = dual_norm(mesh, g_try)
            if res_try < res:
                improved = True
                break
            t *= 0.5
        if not improved:
            break
        z, g, res = z_try, g_try, res_try
    return z, res, max_iters, res <= opts.tol_residual


def _polish_critical_point(mesh, params, data, z, opts, max_iters=60):
    """Gauss-Newton descent of 0.5 ||grad_j||_*^2 in the full space."""

    def s_value(state):
        g = grad_j(mesh, params, state, data, opts.epsilon_reg)
        w = dual_solve(mesh, g)
        return g, w, 0.5 * max(g.pair(w), 0.0)

    g, w, s_val = s_value(z)
    for k in range(max_iters):
        res = float(np.sqrt(2.0 * s_val))
        if res <= opts.tol_residual:
            return z, res, k, True
        g_s = _fd_grad_j_direction(mesh, params, z, data, w, opts)
        d = -1.0 * dual_solve(mesh, g_s)
        slope = g_s.pair(d)
        if not np.isfinite(slope) or slope >= 0.0:
            break
        t = 1.0
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            z_try = z + t * d
            g_try, w_try, s_try = s_value(z_try)
            if s_try <= s_val + opts.armijo_c * t * slope:
                accepted = True
                break
            t *= opts.backtrack_factor
        if not accepted:
            break
        z, g, w, s_val = z_try, g_try, w_try, s_try
    res = float(np.sqrt(2.0 * s_val))
    return z, res, max_iters, res <= opts.tol_residual


def _resample_path(nodes):
    """Equal-chord-length resampling with both endpoints pinned."""
    n = len(nodes)
    diffs = [nodes[i + 1] - nodes[i] for i in range(n - 1)]
    seg = np.array([d.norm() for d in diffs])
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total < 1e-12:
        raise StateError("path degenerated to a point during relaxation")
    out = [nodes[0]]
    for k in range(1, n - 1):
        s = total * k / (n - 1)
        i = int(np.searchsorted(cum, s, side="right") - 1)
        i = min(i, n - 2)
        theta = 0.0 if seg[i] == 0.0 else (s - cum[i]) / seg[i]
        out.append(nodes[i] + float(theta) * diffs[i])
    out.append(nodes[-1])
    return out


def solve_saddle(
    mesh: Mesh,
    params: Params,
    spec: NonlinearitySpec,
    h1: np.ndarray,
    h2: np.ndarray,
    eig1: EigenResult,
    eig2: EigenResult,
    opts: Optional[SolverOptions] = None,
    theta_big: Optional[float] = None,
) -> SaddleSolveResult:
    """Path minimax between far-out branch points (saddle regime).

    After confirming that j decays along all four branches at the chosen
    scaling, a path with antipodal endpoints on the branch set is relaxed
    by repeatedly moving its maximal node downhill and resampling to equal
    arclength; the maximal node is then polished to a critical point.  The
    path must cross {phi >= lambda2 psi} at every iteration, which is
    recorded as the minimum over iterations of the best node value of
    phi - lambda2 psi.
    """
    opts = opts or SolverOptions()
    if not (eig1.converged and eig2.converged):
        raise PreconditionError("both eigenvalue solves must have converged")
    rel_gap = (eig2.lam - eig1.lam) / max(abs(eig1.lam), 1e-30)
    if rel_gap <= 1e-6:
        raise PreconditionError(
            f"spectral gap too small for the saddle geometry (relative gap {rel_gap:.2e})"
        )
    data = ResonantData(spec, h1, h2, lambda1=eig1.lam)
    pair1 = normalize_eigenpair_unitnorm(mesh, params, eig1)
    report = ll_classify(mesh, params, spec, h1, h2, pair1)
    if report.regime != "saddle":
        warnings.warn(
            f"limit-integral classification is '{report.regime}', not 'saddle'",
            stacklevel=2,
        )
    theta = theta_big if theta_big is not None else choose_theta_big(mesh, params, data, pair1)
    branch_values = _branch_samples(mesh, params, data, pair1, theta)
    branch_decreasing = all(row[0] > row[1] > row[2] for row in branch_values)
    endpoint = sign_branch(pair1, theta, params, branch=1)
    gamma = max(row[0] for row in branch_values)

    n = opts.path_nodes
    taus = np.linspace(-1.0, 1.0, n)
    nodes = [StateVector(t * endpoint.u, t * endpoint.v) for t in taus]

    lam2 = eig2.lam
    cross_min = np.inf
    history = []
    outer = 0
    step = opts.step_init
    window = 30
    for outer in range(opts.max_iters):
        jvals = np.array([j_value(mesh, params, zk, data) for zk in nodes])
        cross = float(np.max([phi(mesh, params, zk) - lam2 * psi(mesh, params, zk) for zk in nodes]))
        cross_min = min(cross_min, cross)
        kmax = 1 + int(np.argmax(jvals[1:-1]))
        history.append((outer, float(jvals[kmax]), cross))
        g = grad_j(mesh, params, nodes[kmax], data, opts.epsilon_reg)
        d = -1.0 * dual_solve(mesh, g)
        slope = g.pair(d)
        res = float(np.sqrt(max(0.0, -slope)))
        if res <= opts.tol_residual:
            break
        # the Newton polish takes over once the path maximum stops dropping
        if outer >= window:
            recent = [row[1] for row in history[-window:]]
            if max(recent) - min(recent) <= 1e-3 * max(1.0, abs(recent[-1])):
                break
        t = step
        moved = False
        jk = float(jvals[kmax])
        for _ in range(_MAX_BACKTRACKS):
            z_try = nodes[kmax] + t * d
            j_try = j_value(mesh, params, z_try, data)
            if np.isfinite(j_try) and j_try <= jk + opts.armijo_c * t * slope:
                moved = True
                break
            t *= opts.backtrack_factor
        if not moved:
            break
        nodes[kmax] = z_try
        step = min(2.0 * t, 1e3 * opts.step_init)
        nodes = _resample_path(nodes)

    jvals = [j_value(mesh, params, zk, data) for zk in nodes]
    kmax = 1 + int(np.argmax(jvals[1:-1]))
    z, res, _, polished = _newton_polish(mesh, params, data, nodes[kmax], opts)
    if not polished:
        z, res, _, polished = _polish_critical_point(mesh, params, data, z, opts)
    j_at = j_value(mesh, params, z, data)
    converged = res <= opts.tol_residual
    message = "" if converged else "path relaxation stalled above the residual tolerance"
    return SaddleSolveResult(
        z=z,
        j=j_at,
        residual=res,
        converged=converged,
        iterations=outer + 1,
        history=tuple(history),
        theta_big=theta,
        branch_values=branch_values,
        branch_decreasing=branch_decreasing,
        gamma_endpoints=gamma,
        lambda2_cross_min=float(cross_min),
        message=message,
    )
