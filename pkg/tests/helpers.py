"""Shared finite-difference oracles and state generators for the tests."""

import numpy as np

import pqeig
from pqeig import StateVector


def fd_directional(func, z, w, t):
    """Central difference of a scalar functional along direction w."""
    return (func(z + t * w) - func(z - t * w)) / (2.0 * t)


def fd_matches_gradient(mesh, func, grad, z, w, rel=1e-5):
    """Check <grad(z), w> against a central difference of func at z."""
    t = 1e-6 * (1.0 + z.norm()) / max(w.norm(), 1e-30)
    approx = fd_directional(func, z, w, t)
    exact = grad(z).pair(w)
    scale = max(abs(approx), abs(exact), 1e-10)
    return abs(approx - exact) / scale <= rel, approx, exact


def smooth_pair(mesh, rng):
    from pqeig.eigensolver import smooth_random_state

    return smooth_random_state(mesh, rng)


def direction(mesh, rng):
    z = smooth_pair(mesh, rng)
    return (1.0 / max(z.norm(), 1e-30)) * z


def _low_frequency_profile(mesh, rng):
    """Random few-mode sinusoid, normalized to sup 1, squared to be >= 0."""
    x = mesh.vertices
    if mesh.dim == 1:
        top = x[:, 0].max()
        raw = sum(
            rng.standard_normal() * np.sin(k * np.pi * x[:, 0] / top) for k in (1, 2)
        )
    else:
        lx, ly = x[:, 0].max(), x[:, 1].max()
        raw = sum(
            rng.standard_normal()
            * np.sin(i * np.pi * x[:, 0] / lx)
            * np.sin(j * np.pi * x[:, 1] / ly)
            for i in (1, 2)
            for j in (1, 2)
        )
    raw = raw / max(np.max(np.abs(raw)), 1e-30)
    return raw * raw


def positive_pair(mesh, rng, floor=0.5):
    """Admissible quotient-identity inputs: u >= 0, v > 0 at interior.

    u <= v pointwise and both have O(1) values and gradients, so the
    elementwise quantities are O(1) and absolute tolerances of 1e-10 sit
    far above rounding.
    """
    t = _low_frequency_profile(mesh, rng)
    s = _low_frequency_profile(mesh, rng)
    v = floor + floor * s
    u = floor * t
    u[mesh.boundary_mask] = 0.0
    return u, v
