"""Shared domain types: exponent parameters, nodal state pairs, and the
scalings that make the coupled energies homogeneous of degree one."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COUPLING_TOL = 1e-12


class PQError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(PQError, ValueError):
    """A scalar parameter (exponent, scaling factor, grid size) is invalid."""


class ShapeError(PQError, ValueError):
    """An array does not match the mesh it is paired with."""


class DomainError(PQError, ValueError):
    """Input lies outside the mathematical domain of the operation."""


class StateError(PQError, RuntimeError):
    """Required state (e.g. a first eigenvalue) has not been supplied."""


class StartError(PQError, RuntimeError):
    """The iteration cannot leave its starting point."""


class PreconditionError(PQError, RuntimeError):
    """A solver precondition does not hold."""


def _as_readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Params:
    """Exponents (p, q, alpha, beta) tied by (alpha+1)/p + (beta+1)/q = 1.

    The classical setting has alpha, beta > 0; the solvers also admit
    alpha, beta in (-1, 0], which the coupling identity forces for small
    p = q (validation reports these as warnings, not errors).
    """

    p: float
    q: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.p > 1.0 and self.q > 1.0):
            raise ParameterError(
                f"exponents must satisfy p > 1 and q > 1, got p={self.p}, q={self.q}"
            )
        if not (self.alpha > -1.0 and self.beta > -1.0):
            raise ParameterError(
                f"need alpha > -1 and beta > -1, got alpha={self.alpha}, beta={self.beta}"
            )
        gap = abs((self.alpha + 1.0) / self.p + (self.beta + 1.0) / self.q - 1.0)
        if gap > COUPLING_TOL:
            raise ParameterError(
                "coupling identity (alpha+1)/p + (beta+1)/q = 1 violated "
                f"by {gap:.3e} (tolerance {COUPLING_TOL:.0e})"
            )

    @classmethod
    def with_beta(cls, p: float, q: float, alpha: float) -> "Params":
        """Solve the coupling identity for beta given (p, q, alpha)."""
        beta = q * (1.0 - (alpha + 1.0) / p) - 1.0
        return cls(p, q, alpha, beta)

    @classmethod
    def symmetric(cls, p: float, q: float) -> "Params":
        """The alpha = beta branch of the coupling identity."""
        a = p * q / (p + q) - 1.0
        return cls(p, q, a, a)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Nodal coefficient pair z = (u, v); boundary entries are zero."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", _as_readonly(self.u))
        object.__setattr__(self, "v", _as_readonly(self.v))
        if self.u.ndim != 1 or self.u.shape != self.v.shape:
            raise ShapeError("u and v must be 1-d arrays of equal length")

    def __add__(self, other: "StateVector") -> "StateVector":
        return StateVector(self.u + other.u, self.v + other.v)

    def __sub__(self, other: "StateVector") -> "StateVector":
        return StateVector(self.u - other.u, self.v - other.v)

    def __neg__(self) -> "StateVector":
        return StateVector(-self.u, -self.v)

    def __mul__(self, a: float) -> "StateVector":
        return StateVector(a * self.u, a * self.v)

    __rmul__ = __mul__

    def dot(self, other: "StateVector") -> float:
        return float(self.u @ other.u + self.v @ other.v)

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))

    @classmethod
    def zeros(cls, n: int) -> "StateVector":
        return cls(np.zeros(n), np.zeros(n))


@dataclass(frozen=True, eq=False)
class Covector:
    """Assembled dual pair (weak-form residual or functional gradient)."""

    du: np.ndarray
    dv: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "du", _as_readonly(self.du))
        object.__setattr__(self, "dv", _as_readonly(self.dv))
        if self.du.ndim != 1 or self.du.shape != self.dv.shape:
            raise ShapeError("du and dv must be 1-d arrays of equal length")

    def __add__(self, other: "Covector") -> "Covector":
        return Covector(self.du + other.du, self.dv + other.dv)

    def __sub__(self, other: "Covector") -> "Covector":
        return Covector(self.du - other.du, self.dv - other.dv)

    def __neg__(self) -> "Covector":
        return Covector(-self.du, -self.dv)

    def __mul__(self, a: float) -> "Covector":
        return Covector(a * self.du, a * self.dv)

    __rmul__ = __mul__

    def pair(self, z: StateVector) -> float:
        """Duality pairing <r, z>."""
        return float(self.du @ z.u + self.dv @ z.v)


def homogeneous_scale(z: StateVector, theta: float, params: Params) -> StateVector:
    """Map z to (theta**(1/p) u, theta**(1/q) v) for theta > 0.

    Both coupled energies scale linearly in theta under this map, which is
    what makes the unit level set of the gradient energy retractable in
    closed form.
    """
    if not theta > 0.0:
        raise ParameterError(f"scaling factor must be positive, got {theta}")
    return StateVector(theta ** (1.0 / params.p) * z.u, theta ** (1.0 / params.q) * z.v)


def sign_branch(z: StateVector, theta: float, params: Params, branch: int = 1) -> StateVector:
    """Point of the scaled sign-branch family generated by z.

    Branch 1 is (|t|^(1/p) u, |t|^(1/q) v) * sgn(t); branch 2 negates the
    first component before the sign is applied.  theta = 0 gives the zero
    pair on either branch.
    """
    if branch not in (1, 2):
        raise ParameterError(f"branch must be 1 or 2, got {branch}")
    if theta == 0.0:
        return StateVector(np.zeros_like(z.u), np.zeros_like(z.v))
    s = 1.0 if theta > 0 else -1.0
    a = abs(theta)
    u = a ** (1.0 / params.p) * z.u
    v = a ** (1.0 / params.q) * z.v
    if branch == 2:
        u = -u
    return StateVector(s * u, s * v)
