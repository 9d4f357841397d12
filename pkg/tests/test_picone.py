import numpy as np
import pytest

import pqeig
from helpers import positive_pair
from pqeig import DomainError, ParameterError
from pqeig.mesh import build_interval_mesh, element_means, gradient_field
from pqeig.picone import picone_fields, verify_picone

R_VALUES = [1.2, 1.5, 2.0, 2.5, 3.0, 4.0]


class TestAdmissibility:
    def test_negative_u_rejected(self, mesh64):
        u = np.zeros(mesh64.n_vertices)
        u[3] = -1e-3
        v = np.ones(mesh64.n_vertices)
        with pytest.raises(DomainError):
            picone_fields(mesh64, 2.0, u, v)

    def test_nonpositive_interior_v_rejected(self, mesh64):
        u = np.zeros(mesh64.n_vertices)
        v = np.ones(mesh64.n_vertices)
        v[5] = 0.0
        with pytest.raises(DomainError):
            picone_fields(mesh64, 2.0, u, v)

    def test_boundary_v_exempt(self, mesh64):
        # eigenfunction-like v vanishing at the boundary is admissible
        u, v = positive_pair(mesh64, np.random.default_rng(0))
        fields = picone_fields(mesh64, 2.0, u, v)
        assert fields.l_values.shape == (mesh64.n_elements,)

    def test_r_must_exceed_one(self, mesh64):
        u, v = positive_pair(mesh64, np.random.default_rng(0))
        with pytest.raises(ParameterError):
            picone_fields(mesh64, 1.0, u, v)


class TestIdentityAndSign:
    @pytest.mark.parametrize("r", R_VALUES)
    def test_random_pairs(self, mesh64, r):
        rng = np.random.default_rng(42)
        for _ in range(10):
            u, v = positive_pair(mesh64, rng)
            f = picone_fields(mesh64, r, u, v)
            assert np.max(np.abs(f.l_values - f.r_values)) <= 1e-10
            assert np.min(f.l_values) >= -1e-10

    @pytest.mark.parametrize("k", [0.0, 0.7, 2.0])
    def test_proportional_pairs_vanish(self, mesh64, k):
        rng = np.random.default_rng(1)
        _, v = positive_pair(mesh64, rng)
        u = k * v
        for r in (1.5, 2.0, 3.0):
            f = picone_fields(mesh64, r, u, v)
            assert np.max(np.abs(f.l_values)) <= 1e-12

    def test_r2_closed_form(self, mesh64):
        # L_2 = |grad u - (u/v) grad v|^2 with midpoint quotients
        rng = np.random.default_rng(7)
        u, v = positive_pair(mesh64, rng)
        f = picone_fields(mesh64, 2.0, u, v)
        gu = gradient_field(mesh64, u)
        gv = gradient_field(mesh64, v)
        quot = element_means(mesh64, u) / element_means(mesh64, v)
        closed = np.einsum("ei,ei->e", gu - quot[:, None] * gv, gu - quot[:, None] * gv)
        assert np.max(np.abs(f.l_values - closed)) <= 1e-12

    def test_homogeneity_in_u(self, mesh64):
        rng = np.random.default_rng(3)
        u, v = positive_pair(mesh64, rng)
        for r in (1.5, 2.0, 3.0):
            base = picone_fields(mesh64, r, u, v).l_values
            for c in (0.5, 2.0, 5.0):
                scaled = picone_fields(mesh64, r, c * u, v).l_values
                assert np.allclose(scaled, c**r * base, rtol=1e-10, atol=1e-13)

    def test_two_dimensional_mesh(self, rect_mesh):
        rng = np.random.default_rng(9)
        u, v = positive_pair(rect_mesh, rng)
        for r in (1.5, 2.0, 3.0):
            f = picone_fields(rect_mesh, r, u, v)
            assert np.max(np.abs(f.l_values - f.r_values)) <= 1e-10
            assert np.min(f.l_values) >= -1e-10


class TestVerify:
    def test_equal_pair_passes(self, mesh64):
        _, v = positive_pair(mesh64, np.random.default_rng(5))
        report = verify_picone(mesh64, 2.5, v, v, tol=1e-12)
        assert report["pass"]
        assert report["identity_gap"] <= 1e-13
        assert abs(report["min_l"]) <= 1e-13

    def test_eigencomponent_with_lift(self, mesh128, params22, eig1_128):
        u = np.array(eig1_128.z.u)
        v = np.array(u)
        v[~mesh128.boundary_mask] += 0.5
        report = verify_picone(mesh128, params22.p, u, v, tol=1e-8)
        assert report["pass"]

    def test_zero_tolerance_generically_fails(self, mesh64):
        u, v = positive_pair(mesh64, np.random.default_rng(12))
        report = verify_picone(mesh64, 3.0, u, v, tol=0.0)
        assert not report["pass"]
