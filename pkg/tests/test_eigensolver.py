import numpy as np
import pytest

import pqeig
from helpers import smooth_pair
from pqeig import (
    DomainError,
    ParameterError,
    Params,
    SolverOptions,
    StartError,
    StateVector,
)
from pqeig.eigensolver import (
    canonical_sign,
    check_sign_structure,
    default_start,
    initial_loop,
    normalize_to_manifold,
    relax_loop,
    second_mode_seed,
    smooth_random_state,
)
from pqeig.functionals import eigen_residual, phi, psi, rayleigh_q
from pqeig.mesh import build_interval_mesh, lumped_integral, state_from_nodal


class TestSolverOptions:
    def test_defaults_valid(self):
        SolverOptions()

    @pytest.mark.parametrize(
        "kw",
        [
            {"tol_residual": 0.0},
            {"max_iters": 0},
            {"armijo_c": 1.0},
            {"backtrack_factor": 0.0},
            {"step_init": -1.0},
            {"epsilon_reg": -1e-3},
            {"loop_samples": 2},
            {"path_nodes": 3},
        ],
    )
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ParameterError):
            SolverOptions(**kw)


class TestNormalizeToManifold:
    def test_idempotent_on_manifold(self, mesh64, params22):
        z = normalize_to_manifold(mesh64, params22, default_start(mesh64))
        again = normalize_to_manifold(mesh64, params22, z)
        assert np.allclose(again.u, z.u, atol=1e-12)
        assert abs(phi(mesh64, params22, z) - 1.0) <= 1e-12

    def test_halves_at_phi_four(self, mesh64, params22):
        z = normalize_to_manifold(mesh64, params22, default_start(mesh64))
        z4 = 2.0 * z  # phi scales by 4 at p = q = 2
        out = normalize_to_manifold(mesh64, params22, z4)
        assert np.allclose(out.u, z.u, atol=1e-12)

    def test_q_invariant(self, mesh64, params22):
        z = smooth_pair(mesh64, np.random.default_rng(0))
        q_before = rayleigh_q(mesh64, params22, z)
        q_after = rayleigh_q(mesh64, params22, normalize_to_manifold(mesh64, params22, z))
        assert q_after == pytest.approx(q_before, rel=1e-10)

    def test_zero_rejected(self, mesh64, params22):
        with pytest.raises(DomainError):
            normalize_to_manifold(mesh64, params22, StateVector.zeros(mesh64.n_vertices))


class TestLambda1:
    def test_interval_dirichlet_value(self, mesh128, params22, eig1_128):
        assert eig1_128.converged
        assert eig1_128.lam == pytest.approx(np.pi**2, rel=5e-3)
        assert abs(phi(mesh128, params22, eig1_128.z) - 1.0) <= 1e-10
        assert eig1_128.lam == pytest.approx(1.0 / psi(mesh128, params22, eig1_128.z), rel=1e-10)

    def test_monotone_q_history(self, eig1_128):
        q = [row[1] for row in eig1_128.history]
        assert all(b >= a for a, b in zip(q, q[1:]))

    def test_residual_certificate(self, mesh128, params22, eig1_128):
        assert eigen_residual(mesh128, params22, eig1_128.z, eig1_128.lam) <= 1e-9

    def test_positive_sign_normalization(self, mesh128, eig1_128):
        assert lumped_integral(mesh128, eig1_128.z.u) > 0
        assert lumped_integral(mesh128, eig1_128.z.v) > 0
        signs = check_sign_structure(mesh128, eig1_128.z)
        assert signs.u_neg == 0 and signs.v_neg == 0
        assert signs.u_pos > 0 and signs.v_pos > 0

    def test_scale_invariant_outcome(self, mesh64, params22):
        opts = SolverOptions(tol_residual=1e-9)
        z0 = smooth_pair(mesh64, np.random.default_rng(21))
        r1 = pqeig.solve_lambda1(mesh64, params22, opts, z0)
        r2 = pqeig.solve_lambda1(
            mesh64, params22, opts, pqeig.homogeneous_scale(z0, 5.0, params22)
        )
        assert r1.lam == pytest.approx(r2.lam, rel=1e-8)

    def test_branch_start_same_value(self, mesh64, params22):
        opts = SolverOptions(tol_residual=1e-9)
        z0 = smooth_pair(mesh64, np.random.default_rng(33))
        r1 = pqeig.solve_lambda1(mesh64, params22, opts, z0)
        r2 = pqeig.solve_lambda1(
            mesh64, params22, opts, pqeig.sign_branch(z0, 1.0, params22, branch=2)
        )
        assert r1.lam == pytest.approx(r2.lam, rel=1e-8)

    def test_upper_bound_property(self, mesh128, params22, eig1_128):
        rng = np.random.default_rng(3)
        for _ in range(10):
            z = smooth_pair(mesh128, rng)
            if psi(mesh128, params22, z) <= 0:
                continue
            quotient = phi(mesh128, params22, z) / psi(mesh128, params22, z)
            assert quotient >= eig1_128.lam - 1e-9

    def test_zero_interaction_start_rejected(self, mesh64, params22):
        # disjoint supports: u lives on the left half, v on the right
        x = mesh64.vertices[:, 0]
        u = np.where(x < 0.5, x * (0.5 - x), 0.0)
        v = np.where(x > 0.5, (x - 0.5) * (1.0 - x), 0.0)
        z0 = state_from_nodal(mesh64, u, v)
        with pytest.raises(StartError):
            pqeig.solve_lambda1(mesh64, params22, SolverOptions(), z0)

    def test_nonconvergence_returns_best_iterate(self, mesh64, params22):
        opts = SolverOptions(tol_residual=1e-18, max_iters=5)
        res = pqeig.solve_lambda1(mesh64, params22, opts)
        assert not res.converged
        assert res.message != ""
        assert np.isfinite(res.lam)

    def test_general_p_matches_scalar_closed_form(self):
        # u = v reduction: first eigenvalue of the scalar 3-Laplacian
        params = Params.symmetric(3.0, 3.0)
        mesh = build_interval_mesh(1.0, 128)
        opts = SolverOptions(tol_residual=1e-7, max_iters=4000)
        res = pqeig.solve_lambda1(mesh, params, opts)
        closed = 2.0 * (2.0 * np.pi / (3.0 * np.sin(np.pi / 3.0))) ** 3
        assert res.converged
        assert res.lam == pytest.approx(closed, rel=1e-2)


class TestCanonicalSign:
    def test_flips_to_positive_integrals(self, mesh128, eig1_128):
        z = StateVector(-eig1_128.z.u, eig1_128.z.v)
        fixed = canonical_sign(mesh128, z)
        assert lumped_integral(mesh128, fixed.u) > 0
        assert lumped_integral(mesh128, fixed.v) > 0


class TestLoop:
    def test_initial_loop_invariants(self, mesh64, params22):
        opts = SolverOptions(tol_residual=1e-8)
        eig1 = pqeig.solve_lambda1(mesh64, params22, opts)
        loop = initial_loop(mesh64, params22, eig1.z, 8)
        pts = loop.points
        assert len(pts) == 16
        for j in range(8):
            assert np.array_equal(pts[j + 8].u, -pts[j].u)
            assert abs(phi(mesh64, params22, pts[j]) - 1.0) <= 1e-8

    def test_relaxed_loop_stays_odd_and_feasible(self, mesh64, params22):
        opts = SolverOptions(tol_residual=1e-8, loop_samples=8)
        eig1 = pqeig.solve_lambda1(mesh64, params22, opts)
        x = mesh64.vertices[:, 0]
        cubic = state_from_nodal(mesh64, x * (1 - x) * (1 - 2 * x), x * (1 - x) * (1 - 2 * x))
        loop = initial_loop(mesh64, params22, eig1.z, 8, seed_state=cubic)
        relaxed, history = relax_loop(mesh64, params22, loop, opts, max_outer=10)
        for z in relaxed.points:
            assert abs(phi(mesh64, params22, z) - 1.0) <= 1e-8
        assert len(history) >= 1
        # loop minimum is an increasing estimate up to resampling error
        assert history[-1][1] >= history[0][1] - 1e-6


class TestLambda2:
    def test_interval_second_eigenvalue(self, mesh128, params22, eig1_128, eig2_128):
        assert eig2_128.converged
        assert eig2_128.lam == pytest.approx(4.0 * np.pi**2, rel=1e-2)
        assert eig2_128.lam >= eig1_128.lam - 1e-9

    def test_both_components_change_sign(self, mesh128, eig2_128):
        signs = check_sign_structure(mesh128, eig2_128.z)
        assert min(signs.u_pos, signs.u_neg, signs.v_pos, signs.v_neg) > 0

    def test_generic_seed_converges(self, mesh64, params22):
        # avoid the interpolated-eigenvector shortcut: seed with a cubic
        opts = SolverOptions(tol_residual=1e-7, loop_samples=12, max_iters=2000)
        eig1 = pqeig.solve_lambda1(mesh64, params22, opts)
        x = mesh64.vertices[:, 0]
        cubic = state_from_nodal(mesh64, x * (1 - x) * (1 - 2 * x), x * (1 - x) * (1 - 2 * x))
        loop = initial_loop(mesh64, params22, eig1.z, 12, seed_state=cubic)
        relaxed, _ = relax_loop(mesh64, params22, loop, opts)
        from pqeig.eigensolver import _residual_minimize

        z_min = relaxed.half[relaxed.min_index]
        z, res, lam, _, ok = _residual_minimize(mesh64, params22, z_min, opts)
        assert ok
        assert 1.0 / psi(mesh64, params22, z) == pytest.approx(4.0 * np.pi**2, rel=2e-2)

    def test_requires_converged_lambda1(self, mesh64, params22):
        bad = pqeig.solve_lambda1(mesh64, params22, SolverOptions(tol_residual=1e-18, max_iters=2))
        with pytest.raises(pqeig.PreconditionError):
            pqeig.solve_lambda2(mesh64, params22, SolverOptions(), bad)


class TestSignStructure:
    def test_zero_state(self, mesh64):
        signs = check_sign_structure(mesh64, StateVector.zeros(mesh64.n_vertices))
        assert (signs.u_pos, signs.u_neg, signs.v_pos, signs.v_neg) == (0, 0, 0, 0)


class TestSimplicity:
    def test_single_start_zero_deviation(self, mesh64, params22):
        opts = SolverOptions(tol_residual=1e-8, n_starts=1, seed=5)
        rep = pqeig.simplicity_check(mesh64, params22, opts)
        assert rep.runs == 1 and rep.max_deviation == 0.0

    def test_multistart_agreement(self, mesh64, params22):
        opts = SolverOptions(tol_residual=1e-9, n_starts=4, seed=1)
        rep = pqeig.simplicity_check(mesh64, params22, opts)
        assert rep.failures == 0
        assert rep.max_deviation <= 1e-5
        assert rep.lambda_spread <= 1e-9


class TestIsolationScan:
    def test_endpoints_and_midpoint(self, mesh64, params22):
        opts = SolverOptions(tol_residual=1e-8)
        eig1 = pqeig.solve_lambda1(mesh64, params22, opts)
        eig2 = pqeig.solve_lambda2(mesh64, params22, opts, eig1)
        scan = pqeig.isolation_scan(
            mesh64,
            params22,
            opts,
            lambda_max=eig2.lam,
            n_grid=3,
            lambda1_result=eig1,
            extra_starts=(eig2.z,),
        )
        lams = [row[0] for row in scan]
        assert lams[0] == pytest.approx(eig1.lam)
        assert lams[-1] == pytest.approx(eig2.lam)
        assert scan[0][1] <= opts.tol_residual
        assert scan[-1][1] <= opts.tol_residual
        assert scan[1][1] >= 10.0 * scan[0][1]

    def test_lambda_max_must_exceed_lambda1(self, mesh64, params22):
        opts = SolverOptions(tol_residual=1e-8)
        eig1 = pqeig.solve_lambda1(mesh64, params22, opts)
        with pytest.raises(ParameterError):
            pqeig.isolation_scan(mesh64, params22, opts, lambda_max=1.0, lambda1_result=eig1)


def test_smooth_random_state_boundary(mesh64):
    z = smooth_random_state(mesh64, np.random.default_rng(0))
    assert z.u[0] == 0.0 and z.u[-1] == 0.0 and z.v[0] == 0.0 and z.v[-1] == 0.0


def test_second_mode_seed_changes_sign(mesh64):
    z = second_mode_seed(mesh64)
    assert np.min(z.u) < 0 < np.max(z.u)
