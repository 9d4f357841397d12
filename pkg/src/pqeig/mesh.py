"""Interval and rectangle meshes with piecewise-linear (P1) elements.

Gradients of P1 fields are constant per element and therefore exact;
zero-order integrands use vertex (lumped) quadrature, which makes the
nodal derivative of any pointwise integrand a diagonal expression.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import ParameterError, ShapeError, StateVector, _as_readonly


@dataclass(frozen=True, eq=False)
class Mesh:
    """Simplicial mesh of an interval or axis-aligned rectangle.

    Attributes
    ----------
    vertices : (nv, dim) array of coordinates
    elements : (ne, dim+1) int array of vertex indices
    boundary_mask : (nv,) bool, True on the domain boundary
    element_measure : (ne,) element lengths / areas
    grad_coeffs : (ne, dim+1, dim) constant gradients of the local basis
    lumped_mass : (nv,) vertex quadrature weights
    """

    vertices: np.ndarray
    elements: np.ndarray
    boundary_mask: np.ndarray
    element_measure: np.ndarray
    grad_coeffs: np.ndarray
    lumped_mass: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", _as_readonly(self.vertices))
        elems = np.array(self.elements, dtype=np.int64)
        elems.setflags(write=False)
        object.__setattr__(self, "elements", elems)
        mask = np.array(self.boundary_mask, dtype=bool)
        mask.setflags(write=False)
        object.__setattr__(self, "boundary_mask", mask)
        object.__setattr__(self, "element_measure", _as_readonly(self.element_measure))
        object.__setattr__(self, "grad_coeffs", _as_readonly(self.grad_coeffs))
        object.__setattr__(self, "lumped_mass", _as_readonly(self.lumped_mass))
        if not np.all(self.element_measure > 0.0):
            raise ParameterError("all element measures must be strictly positive")
        if not np.all(self.lumped_mass > 0.0):
            raise ParameterError("all lumped-mass weights must be strictly positive")

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @cached_property
    def interior(self) -> np.ndarray:
        """Indices of interior (non-boundary) vertices."""
        idx = np.flatnonzero(~self.boundary_mask)
        idx.setflags(write=False)
        return idx

    def to_json_dict(self) -> dict:
        """Debugging serialization; not a stability-guaranteed format."""
        return {
            "vertices": self.vertices.tolist(),
            "elements": self.elements.tolist(),
            "boundary": self.boundary_mask.astype(int).tolist(),
        }


def build_interval_mesh(length: float, n_cells: int) -> Mesh:
    """Uniform mesh of (0, length) with n_cells elements.

    Parameters
    ----------
    length : positive extent of the interval
    n_cells : number of elements, at least 2
    """
    if not length > 0.0:
        raise ParameterError(f"length must be positive, got {length}")
    if n_cells < 2:
        raise ParameterError(f"need n_cells >= 2, got {n_cells}")
    n_cells = int(n_cells)
    x = np.linspace(0.0, length, n_cells + 1)
    h = length / n_cells
    vertices = x[:, None]
    elements = np.column_stack([np.arange(n_cells), np.arange(1, n_cells + 1)])
    boundary = np.zeros(n_cells + 1, dtype=bool)
    boundary[0] = boundary[-1] = True
    measure = np.full(n_cells, h)
    grad = np.empty((n_cells, 2, 1))
    grad[:, 0, 0] = -1.0 / h
    grad[:, 1, 0] = 1.0 / h
    lumped = np.bincount(
        elements.ravel(),
        weights=np.repeat(measure / 2.0, 2),
        minlength=n_cells + 1,
    )
    return Mesh(vertices, elements, boundary, measure, grad, lumped)


def build_rect_mesh(lx: float, ly: float, nx: int, ny: int) -> Mesh:
    """Structured triangulation of (0, lx) x (0, ly).

    Each grid cell is split along its lower-left to upper-right diagonal
    into two triangles; all perimeter vertices are boundary-marked.
    """
    if not (lx > 0.0 and ly > 0.0):
        raise ParameterError(f"rectangle sides must be positive, got {lx} x {ly}")
    if nx < 2 or ny < 2:
        raise ParameterError(f"need nx, ny >= 2, got nx={nx}, ny={ny}")
    nx, ny = int(nx), int(ny)
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])  # index = j*(nx+1) + i

    cells_i, cells_j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    a = (cells_j * (nx + 1) + cells_i).ravel()
    b = a + 1
    c = a + (nx + 1)
    d = c + 1
    elements = np.vstack(
        [np.column_stack([a, b, d]), np.column_stack([a, d, c])]
    )

    boundary = np.zeros(vertices.shape[0], dtype=bool)
    ii = np.arange(vertices.shape[0]) % (nx + 1)
    jj = np.arange(vertices.shape[0]) // (nx + 1)
    boundary[(ii == 0) | (ii == nx) | (jj == 0) | (jj == ny)] = True

    p0 = vertices[elements[:, 0]]
    p1 = vertices[elements[:, 1]]
    p2 = vertices[elements[:, 2]]
    e1 = p1 - p0
    e2 = p2 - p0
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    measure = 0.5 * np.abs(det)

    # Barycentric gradients: rows of the inverse edge matrix.
    inv = np.empty((elements.shape[0], 2, 2))
    inv[:, 0, 0] = e2[:, 1] / det
    inv[:, 0, 1] = -e2[:, 0] / det
    inv[:, 1, 0] = -e1[:, 1] / det
    inv[:, 1, 1] = e1[:, 0] / det
    grad = np.empty((elements.shape[0], 3, 2))
    grad[:, 1, :] = inv[:, 0, :]
    grad[:, 2, :] = inv[:, 1, :]
    grad[:, 0, :] = -grad[:, 1, :] - grad[:, 2, :]

    lumped = np.bincount(
        elements.ravel(),
        weights=np.repeat(measure / 3.0, 3),
        minlength=vertices.shape[0],
    )
    return Mesh(vertices, elements, boundary, measure, grad, lumped)


def gradient_field(mesh: Mesh, w: np.ndarray) -> np.ndarray:
    """Per-element constant gradient of the P1 interpolant of w; (ne, dim)."""
    w = np.asarray(w, dtype=float)
    if w.shape != (mesh.n_vertices,):
        raise ShapeError(
            f"nodal array has length {w.shape}, mesh has {mesh.n_vertices} vertices"
        )
    return np.einsum("eki,ek->ei", mesh.grad_coeffs, w[mesh.elements])


def integrate_elementwise(mesh: Mesh, values: np.ndarray) -> float:
    """Sum of per-element values weighted by element measure."""
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_elements,):
        raise ShapeError(
            f"got {values.shape} values for {mesh.n_elements} elements"
        )
    return float(values @ mesh.element_measure)


def lumped_integral(mesh: Mesh, nodal: np.ndarray) -> float:
    """Vertex-quadrature integral of a nodal field."""
    nodal = np.asarray(nodal, dtype=float)
    if nodal.shape != (mesh.n_vertices,):
        raise ShapeError(
            f"got {nodal.shape} values for {mesh.n_vertices} vertices"
        )
    return float(nodal @ mesh.lumped_mass)


def element_means(mesh: Mesh, w: np.ndarray) -> np.ndarray:
    """Element-midpoint values of the P1 interpolant (mean of vertex values)."""
    w = np.asarray(w, dtype=float)
    if w.shape != (mesh.n_vertices,):
        raise ShapeError("nodal array length does not match the mesh")
    return w[mesh.elements].mean(axis=1)


def state_from_nodal(mesh: Mesh, u: np.ndarray, v: np.ndarray) -> StateVector:
    """Build a state from nodal samples, zeroing boundary entries exactly."""
    u = np.array(u, dtype=float)
    v = np.array(v, dtype=float)
    if u.shape != (mesh.n_vertices,) or v.shape != (mesh.n_vertices,):
        raise ShapeError("nodal arrays must have one entry per mesh vertex")
    u[mesh.boundary_mask] = 0.0
    v[mesh.boundary_mask] = 0.0
    return StateVector(u, v)
