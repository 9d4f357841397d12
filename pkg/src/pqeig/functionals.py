"""Coupled energies and their discrete derivatives.

Two functionals drive everything here: the gradient energy

    phi(z) = ((alpha+1)/p) int |grad u|^p + ((beta+1)/q) int |grad v|^q,

evaluated exactly element by element, and the interaction integral

    psi(z) = int |u|^(alpha+1) |v|^(beta+1),

evaluated with vertex (lumped) quadrature.  Both scale linearly under the
(p,q)-homogeneous map of :func:`pqeig.core.homogeneous_scale`.  The module
also evaluates the resonant functional

    j(z) = phi(z) - lambda1 psi(z) - int F(x,u,v) + int h1 u + int h2 v

and a mesh-consistent dual norm used as the stopping criterion of every
solver: each block of a residual covector is measured in the inverse of
the fixed linear stiffness operator (the p = 2 form), factored once per
mesh.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import Covector, DomainError, Params, ShapeError, StateError, StateVector
from .mesh import Mesh, gradient_field


def _check_state(mesh: Mesh, z: StateVector) -> None:
    if z.u.shape != (mesh.n_vertices,):
        raise ShapeError(
            f"state has {z.u.shape[0]} entries per component, "
            f"mesh has {mesh.n_vertices} vertices"
        )


def _check_covector(mesh: Mesh, r: Covector) -> None:
    if r.du.shape != (mesh.n_vertices,):
        raise ShapeError("covector length does not match the mesh")


def _zero_boundary(mesh: Mesh, arr: np.ndarray) -> np.ndarray:
    arr[mesh.boundary_mask] = 0.0
    return arr


# ---------------------------------------------------------------------------
# energies


def _grad_energy(mesh: Mesh, w: np.ndarray, r: float, eps: float) -> float:
    g = gradient_field(mesh, w)
    g2 = np.einsum("ei,ei->e", g, g)
    if eps > 0.0:
        dens = (g2 + eps * eps) ** (0.5 * r) - eps**r
    else:
        dens = g2 ** (0.5 * r)
    return float(dens @ mesh.element_measure)


def phi(mesh: Mesh, params: Params, z: StateVector, eps: float = 0.0) -> float:
    """Gradient energy of z; nonnegative, zero only at z = 0 (for eps = 0).

    eps > 0 smooths the integrand to (|g|^2 + eps^2)^(r/2) - eps^r, which
    keeps phi(0) = 0 and leaves the gradient formula exact.
    """
    _check_state(mesh, z)
    a1, b1 = params.alpha + 1.0, params.beta + 1.0
    return (a1 / params.p) * _grad_energy(mesh, z.u, params.p, eps) + (
        b1 / params.q
    ) * _grad_energy(mesh, z.v, params.q, eps)


def psi(mesh: Mesh, params: Params, z: StateVector) -> float:
    """Interaction integral under lumped quadrature; zero wherever u*v is."""
    _check_state(mesh, z)
    dens = np.abs(z.u) ** (params.alpha + 1.0) * np.abs(z.v) ** (params.beta + 1.0)
    return float(dens @ mesh.lumped_mass)


def rayleigh_q(mesh: Mesh, params: Params, z: StateVector) -> float:
    """psi(z)/phi(z); invariant under the homogeneous scaling."""
    denom = phi(mesh, params, z)
    if denom == 0.0:
        raise DomainError("Rayleigh quotient undefined at the zero state")
    return psi(mesh, params, z) / denom


def e_map(z: StateVector, params: Params) -> StateVector:
    """Componentwise (u/p, v/q); pairs with both energy gradients to give
    the energies themselves (Euler identity for degree-one homogeneity)."""
    return StateVector(z.u / params.p, z.v / params.q)


# ---------------------------------------------------------------------------
# gradients


def _grad_energy_grad(
    mesh: Mesh, w: np.ndarray, r: float, weight: float, eps: float
) -> np.ndarray:
    g = gradient_field(mesh, w)
    g2 = np.einsum("ei,ei->e", g, g) + eps * eps
    with np.errstate(divide="ignore"):
        coef = np.where(g2 > 0.0, g2 ** (0.5 * (r - 2.0)), 0.0)
    flux = (weight * mesh.element_measure * coef)[:, None] * g
    contrib = np.einsum("eki,ei->ek", mesh.grad_coeffs, flux)
    out = np.bincount(
        mesh.elements.ravel(), weights=contrib.ravel(), minlength=mesh.n_vertices
    )
    return out


def grad_phi(mesh: Mesh, params: Params, z: StateVector, eps: float = 0.0) -> Covector:
    """Exact gradient of the discrete gradient energy (same eps smoothing).

    The per-element flux |g|^(r-2) g has magnitude |g|^(r-1), so the value
    is finite for every r > 1 even at flat elements; eps only matters for
    second derivatives.
    """
    _check_state(mesh, z)
    du = _grad_energy_grad(mesh, z.u, params.p, params.alpha + 1.0, eps)
    dv = _grad_energy_grad(mesh, z.v, params.q, params.beta + 1.0, eps)
    return Covector(_zero_boundary(mesh, du), _zero_boundary(mesh, dv))


def _signed_power(x: np.ndarray, expo: float) -> np.ndarray:
    """|x|^expo * sgn(x) with the continuous-extension value 0 at x = 0."""
    ax = np.abs(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(ax > 0.0, ax**expo * np.sign(x), 0.0)
    return out


def grad_psi(mesh: Mesh, params: Params, z: StateVector) -> Covector:
    """Exact gradient of the lumped interaction integral."""
    _check_state(mesh, z)
    a1, b1 = params.alpha + 1.0, params.beta + 1.0
    au, av = np.abs(z.u), np.abs(z.v)
    du = mesh.lumped_mass * a1 * _signed_power(z.u, params.alpha) * av**b1
    dv = mesh.lumped_mass * b1 * au**a1 * _signed_power(z.v, params.beta)
    return Covector(_zero_boundary(mesh, du), _zero_boundary(mesh, dv))


# ---------------------------------------------------------------------------
# dual norm (fixed p = 2 stiffness metric, factored once per mesh)

_STIFFNESS_CACHE: "weakref.WeakKeyDictionary[Mesh, tuple]" = weakref.WeakKeyDictionary()


def _interior_stiffness(mesh: Mesh):
    cached = _STIFFNESS_CACHE.get(mesh)
    if cached is not None:
        return cached
    ne, k = mesh.elements.shape
    local = np.einsum(
        "e,eji,eki->ejk", mesh.element_measure, mesh.grad_coeffs, mesh.grad_coeffs
    )
    rows = np.repeat(mesh.elements, k, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, k)).ravel()
    full = sp.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(mesh.n_vertices, mesh.n_vertices)
    ).tocsc()
    interior = mesh.interior
    kmat = full[interior][:, interior].tocsc()
    factor = spla.splu(kmat)
    cached = (factor, interior)
    _STIFFNESS_CACHE[mesh] = cached
    return cached


def dual_solve(mesh: Mesh, r: Covector) -> StateVector:
    """Riesz lift of a residual covector through the fixed stiffness solve.

    Boundary entries of r are ignored (Dirichlet rows are eliminated), and
    the lifted state is zero there.
    """
    _check_covector(mesh, r)
    factor, interior = _interior_stiffness(mesh)
    rhs = np.column_stack([r.du[interior], r.dv[interior]])
    sol = factor.solve(rhs)
    u = np.zeros(mesh.n_vertices)
    v = np.zeros(mesh.n_vertices)
    u[interior] = sol[:, 0]
    v[interior] = sol[:, 1]
    return StateVector(u, v)


def dual_norm(mesh: Mesh, r: Covector) -> float:
    """Blockwise sqrt(r . K^{-1} r) with K the fixed linear stiffness."""
    lifted = dual_solve(mesh, r)
    return float(np.sqrt(max(r.pair(lifted), 0.0)))


def eigen_residual(
    mesh: Mesh, params: Params, z: StateVector, lam: float, eps: float = 0.0
) -> float:
    """Dual norm of grad_phi(z) - lam * grad_psi(z); near zero at eigenpairs."""
    _check_state(mesh, z)
    r = grad_phi(mesh, params, z, eps) - lam * grad_psi(mesh, params, z)
    return dual_norm(mesh, r)


# ---------------------------------------------------------------------------
# resonant functional


@dataclass(frozen=True, eq=False)
class ResonantData:
    """Nonlinearity, forcings and the first eigenvalue of the same mesh.

    ``nonlinearity`` is duck-typed: it must expose vectorized callables
    f(x, s, t), f_s(x, s, t), f_t(x, s, t) taking the (nv, dim) vertex
    coordinates.  lambda1 must come from the eigensolver on the same mesh
    so that the discrete problem is exactly resonant.
    """

    nonlinearity: object
    h1: np.ndarray
    h2: np.ndarray
    lambda1: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "h1", np.asarray(self.h1, dtype=float))
        object.__setattr__(self, "h2", np.asarray(self.h2, dtype=float))
        if self.h1.shape != self.h2.shape or self.h1.ndim != 1:
            raise ShapeError("h1 and h2 must be 1-d arrays of equal length")


def _check_data(mesh: Mesh, data: ResonantData) -> float:
    if data.h1.shape != (mesh.n_vertices,):
        raise ShapeError("forcing arrays must have one entry per mesh vertex")
    if data.lambda1 is None:
        raise StateError("ResonantData.lambda1 is unset; solve the eigenvalue first")
    return float(data.lambda1)


def j_value(mesh: Mesh, params: Params, z: StateVector, data: ResonantData) -> float:
    """Resonant energy phi - lambda1 psi - int F + int h1 u + int h2 v."""
    _check_state(mesh, z)
    lam1 = _check_data(mesh, data)
    fvals = np.asarray(data.nonlinearity.f(mesh.vertices, z.u, z.v), dtype=float)
    m = mesh.lumped_mass
    return (
        phi(mesh, params, z)
        - lam1 * psi(mesh, params, z)
        - float(fvals @ m)
        + float((data.h1 * z.u) @ m)
        + float((data.h2 * z.v) @ m)
    )


def grad_j(
    mesh: Mesh, params: Params, z: StateVector, data: ResonantData, eps: float = 0.0
) -> Covector:
    """Gradient of the resonant energy; its zeros are the weak solutions."""
    _check_state(mesh, z)
    lam1 = _check_data(mesh, data)
    gp = grad_phi(mesh, params, z, eps)
    gs = grad_psi(mesh, params, z)
    m = mesh.lumped_mass
    fs = np.asarray(data.nonlinearity.f_s(mesh.vertices, z.u, z.v), dtype=float)
    ft = np.asarray(data.nonlinearity.f_t(mesh.vertices, z.u, z.v), dtype=float)
    du = gp.du - lam1 * gs.du - m * fs + m * data.h1
    dv = gp.dv - lam1 * gs.dv - m * ft + m * data.h2
    return Covector(_zero_boundary(mesh, du), _zero_boundary(mesh, dv))


# ---------------------------------------------------------------------------
# Hessian actions (used by residual-minimizing diagnostics)


def _grad_energy_hess_vec(
    mesh: Mesh, w: np.ndarray, h: np.ndarray, r: float, weight: float, eps: float
) -> np.ndarray:
    g = gradient_field(mesh, w)
    gh = gradient_field(mesh, h)
    s2 = np.einsum("ei,ei->e", g, g) + eps * eps
    with np.errstate(divide="ignore"):
        c1 = np.where(s2 > 0.0, s2 ** (0.5 * (r - 2.0)), 0.0)
    dot = np.einsum("ei,ei->e", g, gh)
    with np.errstate(divide="ignore", invalid="ignore"):
        c2 = np.where(s2 > 0.0, (r - 2.0) * c1 * dot / s2, 0.0)
    flux = (mesh.element_measure * c1)[:, None] * gh + (
        mesh.element_measure * c2
    )[:, None] * g
    contrib = weight * np.einsum("eki,ei->ek", mesh.grad_coeffs, flux)
    return np.bincount(
        mesh.elements.ravel(), weights=contrib.ravel(), minlength=mesh.n_vertices
    )


def hess_phi_vec(
    mesh: Mesh, params: Params, z: StateVector, w: StateVector, eps: float = 0.0
) -> Covector:
    """Directional derivative of grad_phi at z along w.

    For p < 2 the flux Jacobian is singular at flat elements; pass eps > 0
    there.  For p >= 2 the guarded formula is finite as written.
    """
    _check_state(mesh, z)
    _check_state(mesh, w)
    du = _grad_energy_hess_vec(mesh, z.u, w.u, params.p, params.alpha + 1.0, eps)
    dv = _grad_energy_hess_vec(mesh, z.v, w.v, params.q, params.beta + 1.0, eps)
    return Covector(_zero_boundary(mesh, du), _zero_boundary(mesh, dv))


def _abs_power(x: np.ndarray, expo: float) -> np.ndarray:
    ax = np.abs(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ax > 0.0, ax**expo, 0.0)


def psi_hessian_diags(mesh: Mesh, params: Params, z: StateVector):
    """Vertex-diagonal blocks (d11, d12, d22) of the interaction Hessian,
    lumped-mass weight included.  Vanishing coefficients contribute 0,
    consistent with the convention in grad_psi."""
    _check_state(mesh, z)
    a, b = params.alpha, params.beta
    a1, b1 = a + 1.0, b + 1.0
    m = mesh.lumped_mass
    zeros = np.zeros(mesh.n_vertices)
    d11 = zeros if a == 0.0 else m * a1 * a * _abs_power(z.u, a - 1.0) * np.abs(z.v) ** b1
    d22 = zeros if b == 0.0 else m * b1 * b * np.abs(z.u) ** a1 * _abs_power(z.v, b - 1.0)
    d12 = m * a1 * b1 * _signed_power(z.u, a) * _signed_power(z.v, b)
    return d11, d12, d22


def hess_psi_vec(mesh: Mesh, params: Params, z: StateVector, w: StateVector) -> Covector:
    """Directional derivative of grad_psi at z along w (vertex-diagonal)."""
    _check_state(mesh, w)
    d11, d12, d22 = psi_hessian_diags(mesh, params, z)
    du = d11 * w.u + d12 * w.v
    dv = d12 * w.u + d22 * w.v
    return Covector(_zero_boundary(mesh, du), _zero_boundary(mesh, dv))


def _grad_energy_hess_matrix(mesh: Mesh, w: np.ndarray, r: float, weight: float, eps: float):
    """Sparse nv x nv Jacobian of the single-block flux assembly at w."""
    g = gradient_field(mesh, w)
    s2 = np.einsum("ei,ei->e", g, g) + eps * eps
    with np.errstate(divide="ignore"):
        c1 = np.where(s2 > 0.0, s2 ** (0.5 * (r - 2.0)), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        c2 = np.where(s2 > 0.0, (r - 2.0) * c1 / s2, 0.0)
    # local matrix: A_e [ c1 (g_j . g_k) + c2 (g . g_j)(g . g_k) ]
    base = np.einsum("eji,eki->ejk", mesh.grad_coeffs, mesh.grad_coeffs)
    proj = np.einsum("eji,ei->ej", mesh.grad_coeffs, g)
    local = weight * mesh.element_measure[:, None, None] * (
        c1[:, None, None] * base
        + c2[:, None, None] * proj[:, :, None] * proj[:, None, :]
    )
    k = mesh.elements.shape[1]
    rows = np.repeat(mesh.elements, k, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, k)).ravel()
    return sp.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(mesh.n_vertices, mesh.n_vertices)
    ).tocsr()


def phi_hessian_blocks(mesh: Mesh, params: Params, z: StateVector, eps: float = 0.0):
    """Sparse u- and v-block Hessians of the gradient energy at z."""
    _check_state(mesh, z)
    hu = _grad_energy_hess_matrix(mesh, z.u, params.p, params.alpha + 1.0, eps)
    hv = _grad_energy_hess_matrix(mesh, z.v, params.q, params.beta + 1.0, eps)
    return hu, hv
