import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import pqeig
from pqeig import (
    Covector,
    ParameterError,
    Params,
    ShapeError,
    StateVector,
    homogeneous_scale,
    sign_branch,
)


class TestParams:
    def test_valid(self):
        p = Params(2.0, 2.0, 0.0, 0.0)
        assert p.p == 2.0 and p.beta == 0.0

    def test_rejects_small_exponents(self):
        with pytest.raises(ParameterError):
            Params(1.0, 2.0, 0.0, 0.0)
        with pytest.raises(ParameterError):
            Params(2.0, 0.5, 0.0, 0.0)

    def test_rejects_alpha_at_minus_one(self):
        with pytest.raises(ParameterError):
            Params(2.0, 2.0, -1.0, 1.0)

    def test_rejects_broken_coupling(self):
        with pytest.raises(ParameterError, match="coupling"):
            Params(2.0, 2.0, 0.1, 0.0)

    def test_with_beta_solves_identity(self):
        p = Params.with_beta(3.0, 1.5, 0.5)
        assert p.beta == pytest.approx(-0.25, abs=1e-15)

    @given(
        st.floats(1.2, 6.0),
        st.floats(1.2, 6.0),
    )
    def test_symmetric_coupling(self, p, q):
        pr = Params.symmetric(p, q)
        assert pr.alpha == pr.beta
        gap = abs((pr.alpha + 1) / pr.p + (pr.beta + 1) / pr.q - 1.0)
        assert gap <= 1e-12

    @given(st.floats(1.2, 6.0), st.floats(-0.9, 3.0))
    def test_with_beta_coupling(self, p, alpha):
        q = 2.5
        try:
            pr = Params.with_beta(p, q, alpha)
        except ParameterError:
            return  # beta fell outside (-1, inf); nothing to check
        gap = abs((pr.alpha + 1) / pr.p + (pr.beta + 1) / pr.q - 1.0)
        assert gap <= 1e-12


class TestStateArithmetic:
    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            StateVector(np.zeros(3), np.zeros(4))
        with pytest.raises(ShapeError):
            Covector(np.zeros((2, 2)), np.zeros((2, 2)))

    def test_immutable(self):
        z = StateVector(np.ones(3), np.ones(3))
        with pytest.raises(ValueError):
            z.u[0] = 2.0

    def test_pairing(self):
        z = StateVector(np.array([1.0, 2.0]), np.array([0.0, 1.0]))
        r = Covector(np.array([3.0, 0.0]), np.array([1.0, 1.0]))
        assert r.pair(z) == pytest.approx(3.0 + 1.0)

    def test_linear_ops(self):
        z = StateVector(np.array([1.0, -1.0]), np.array([2.0, 0.0]))
        w = 2.0 * z - z
        assert np.allclose(w.u, z.u) and np.allclose(w.v, z.v)
        assert (-z).u[0] == -1.0


class TestHomogeneousScale:
    def setup_method(self):
        self.params = Params(2.0, 2.0, 0.0, 0.0)
        self.z = StateVector(np.array([0.0, 1.0, 0.5, 0.0]), np.array([0.0, -2.0, 1.0, 0.0]))

    def test_identity(self):
        out = homogeneous_scale(self.z, 1.0, self.params)
        assert np.array_equal(out.u, self.z.u)

    def test_sqrt_scaling(self):
        out = homogeneous_scale(self.z, 4.0, self.params)
        assert np.allclose(out.u, 2.0 * self.z.u)
        assert np.allclose(out.v, 2.0 * self.z.v)

    def test_zero_fixed_point(self):
        z0 = StateVector(np.zeros(4), np.zeros(4))
        out = homogeneous_scale(z0, 7.3, self.params)
        assert np.all(out.u == 0.0) and np.all(out.v == 0.0)

    def test_rejects_nonpositive_theta(self):
        for theta in (0.0, -1.0):
            with pytest.raises(ParameterError):
                homogeneous_scale(self.z, theta, self.params)

    @given(st.floats(0.05, 20.0), st.floats(0.05, 20.0))
    def test_composition(self, a, b):
        params = Params.with_beta(2.5, 1.8, 0.3)
        z = StateVector(np.array([0.0, 0.7, -0.2, 0.0]), np.array([0.0, 1.1, 0.4, 0.0]))
        once = homogeneous_scale(z, a * b, params)
        twice = homogeneous_scale(homogeneous_scale(z, a, params), b, params)
        assert np.allclose(once.u, twice.u, rtol=0, atol=1e-12 * max(1, a * b))
        assert np.allclose(once.v, twice.v, rtol=0, atol=1e-12 * max(1, a * b))

    @given(st.floats(0.1, 10.0))
    def test_preserves_boundary_zeros(self, theta):
        out = homogeneous_scale(self.z, theta, self.params)
        assert out.u[0] == 0.0 and out.u[-1] == 0.0
        assert out.v[0] == 0.0 and out.v[-1] == 0.0


class TestSignBranch:
    def setup_method(self):
        self.params = Params(2.0, 2.0, 0.0, 0.0)
        self.z = StateVector(np.array([0.0, 1.0, 0.0]), np.array([0.0, 2.0, 0.0]))

    def test_theta_one_branch_one(self):
        out = sign_branch(self.z, 1.0, self.params, branch=1)
        assert np.array_equal(out.u, self.z.u) and np.array_equal(out.v, self.z.v)

    def test_theta_minus_one_flips_both(self):
        out = sign_branch(self.z, -1.0, self.params, branch=1)
        assert np.allclose(out.u, -self.z.u) and np.allclose(out.v, -self.z.v)

    def test_branch_two_flips_first(self):
        out = sign_branch(self.z, 1.0, self.params, branch=2)
        assert np.allclose(out.u, -self.z.u) and np.allclose(out.v, self.z.v)

    def test_theta_zero_gives_zero(self):
        for branch in (1, 2):
            out = sign_branch(self.z, 0.0, self.params, branch=branch)
            assert np.all(out.u == 0.0) and np.all(out.v == 0.0)

    def test_bad_branch(self):
        with pytest.raises(ParameterError):
            sign_branch(self.z, 1.0, self.params, branch=3)
