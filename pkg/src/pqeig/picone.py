"""Pointwise verification of the two equivalent quotient-field quantities

    L_r(u,v) = |grad u|^r + (r-1)(u/v)^r |grad v|^r
               - r (u/v)^(r-1) |grad v|^(r-2) grad v . grad u,
    R_r(u,v) = |grad u|^r - |grad v|^(r-2) grad v . grad(u^r / v^(r-1)),

for u >= 0, v > 0 and r > 1.  Both are evaluated per element from the P1
gradients and the element-midpoint values of u and v; the quotient-field
gradient in R_r is expanded by the chain rule from those same midpoint
values rather than re-interpolated, so L_r = R_r holds in floating point
up to rounding and nonnegativity of L_r can be checked elementwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DomainError, ParameterError, ShapeError
from .mesh import Mesh, element_means, gradient_field

_INTERIOR_POSITIVITY = 1e-14


@dataclass(frozen=True, eq=False)
class PiconeField:
    """Per-element values of the two quotient-field quantities."""

    l_values: np.ndarray
    r_values: np.ndarray

    def __post_init__(self):
        lv = np.asarray(self.l_values, dtype=float)
        rv = np.asarray(self.r_values, dtype=float)
        object.__setattr__(self, "l_values", lv)
        object.__setattr__(self, "r_values", rv)
        if lv.shape != rv.shape or lv.ndim != 1:
            raise ShapeError("l_values and r_values must be 1-d of equal length")


def _check_admissible(mesh: Mesh, r: float, u: np.ndarray, v: np.ndarray):
    if not r > 1.0:
        raise ParameterError(f"need r > 1, got {r}")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (mesh.n_vertices,) or v.shape != (mesh.n_vertices,):
        raise ShapeError("u and v must have one entry per mesh vertex")
    if np.any(u < 0.0):
        raise DomainError("u must be nonnegative at every vertex")
    interior = ~mesh.boundary_mask
    if np.any(v[interior] <= _INTERIOR_POSITIVITY):
        raise DomainError(
            "v must be strictly positive at interior vertices "
            f"(threshold {_INTERIOR_POSITIVITY:g}); boundary vertices are exempt"
        )
    return u, v


def picone_fields(mesh: Mesh, r: float, u: np.ndarray, v: np.ndarray) -> PiconeField:
    """Elementwise L_r and R_r for an admissible pair (u, v).

    Midpoint values of u and v stay positive on elements touching the
    boundary because interior vertex values are, so the quotient u/v is
    well defined everywhere it is used.
    """
    u, v = _check_admissible(mesh, r, u, v)
    gu = gradient_field(mesh, u)
    gv = gradient_field(mesh, v)
    um = element_means(mesh, u)
    vm = element_means(mesh, v)

    gu_norm = np.sqrt(np.einsum("ei,ei->e", gu, gu))
    gv_norm = np.sqrt(np.einsum("ei,ei->e", gv, gv))
    dot = np.einsum("ei,ei->e", gu, gv)
    quot = um / vm

    with np.errstate(divide="ignore", invalid="ignore"):
        gv_rm2 = np.where(gv_norm > 0.0, gv_norm ** (r - 2.0), 0.0)
    gv_r = gv_rm2 * gv_norm**2
    l_vals = (
        gu_norm**r
        + (r - 1.0) * quot**r * gv_r
        - r * quot ** (r - 1.0) * gv_rm2 * dot
    )

    # grad(u^r / v^(r-1)) expanded at midpoints:
    #   r (u/v)^(r-1) grad u - (r-1) (u/v)^r grad v
    quot_dot = r * quot ** (r - 1.0) * dot - (r - 1.0) * quot**r * gv_norm**2
    r_vals = gu_norm**r - gv_rm2 * quot_dot
    return PiconeField(l_vals, r_vals)


def verify_picone(mesh: Mesh, r: float, u: np.ndarray, v: np.ndarray, tol: float) -> dict:
    """Identity gap and nonnegativity floor of the elementwise quantities.

    pass requires both max |L_r - R_r| <= tol and min L_r >= -tol.
    """
    fields = picone_fields(mesh, r, u, v)
    identity_gap = float(np.max(np.abs(fields.l_values - fields.r_values)))
    min_l = float(np.min(fields.l_values))
    return {
        "identity_gap": identity_gap,
        "min_l": min_l,
        "pass": bool(identity_gap <= tol and min_l >= -tol),
    }
