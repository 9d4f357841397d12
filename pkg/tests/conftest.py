import hypothesis
import numpy as np
import pytest

import pqeig

hypothesis.settings.register_profile(
    "default", max_examples=25, deadline=None, derandomize=True
)
hypothesis.settings.load_profile("default")


@pytest.fixture(scope="session")
def mesh64():
    return pqeig.build_interval_mesh(1.0, 64)


@pytest.fixture(scope="session")
def mesh128():
    return pqeig.build_interval_mesh(1.0, 128)


@pytest.fixture(scope="session")
def rect_mesh():
    return pqeig.build_rect_mesh(1.0, 1.0, 8, 8)


@pytest.fixture(scope="session")
def params22():
    return pqeig.Params(2.0, 2.0, 0.0, 0.0)


@pytest.fixture(scope="session")
def eig1_128(mesh128, params22):
    opts = pqeig.SolverOptions(tol_residual=1e-9)
    res = pqeig.solve_lambda1(mesh128, params22, opts)
    assert res.converged
    return res


@pytest.fixture(scope="session")
def eig2_128(mesh128, params22, eig1_128):
    opts = pqeig.SolverOptions(tol_residual=1e-9)
    res = pqeig.solve_lambda2(mesh128, params22, opts, eig1_128)
    assert res.converged
    return res


def random_state(mesh, rng, smooth=True):
    """Seeded random state with zero boundary; smoothed by default."""
    if smooth:
        from pqeig.eigensolver import smooth_random_state

        return smooth_random_state(mesh, rng)
    u = rng.uniform(-1.0, 1.0, mesh.n_vertices)
    v = rng.uniform(-1.0, 1.0, mesh.n_vertices)
    return pqeig.state_from_nodal(mesh, u, v)
