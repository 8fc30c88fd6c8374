import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from sparsemusic.analysis import mutual_coherence, ric_bruteforce
from sparsemusic.solvers import (
    SparseProblem,
    SparseSolution,
    best_sparse_approximation,
    bpdn_error_constants,
    bpdn_solve,
    normalize_columns,
    omp_guarantee,
    omp_solve,
    problem_from_json,
    problem_to_json,
    solution_from_json,
    solution_to_json,
    verify_bpdn_bound,
)
from sparsemusic.solvers import _soft_threshold


def fourier_dictionary(n, n_cols, seed, d=1):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1, 1, size=(n, d))
    p = np.arange(1, n_cols + 1, dtype=float)[:, None] if d == 1 else None
    return np.exp(-1j * np.pi * a @ p.T) / np.sqrt(n)


def low_coherence_dictionary(seed, n=8, n_cols=9):
    """Rows of the 9-point DFT minus one, with random column phases.

    Mutual coherence is exactly 1/8 and the order-4 isometry constants are
    (1/8, 3/8), verified by enumeration, so the error-bound condition holds
    with sparsity 2.
    """
    rng = np.random.default_rng(seed)
    f = np.exp(-2j * np.pi * np.outer(np.arange(n_cols), np.arange(n_cols)) / n_cols)
    rows = np.delete(np.arange(n_cols), rng.integers(n_cols))
    m = f[rows] / np.sqrt(n)
    return m * np.exp(2j * np.pi * rng.uniform(size=n_cols))[None, :]


def bp_enumeration_oracle(a, y, kmax):
    """Min-l1 feasible point over all supports of size <= kmax (equality case)."""
    best_obj, best_z = np.inf, None
    n, n_cols = a.shape
    scale = max(1.0, np.linalg.norm(y))
    for k in range(1, kmax + 1):
        for sup in itertools.combinations(range(n_cols), k):
            sub = a[:, sup]
            z, *_ = np.linalg.lstsq(sub, y, rcond=None)
            if np.linalg.norm(sub @ z - y) <= 1e-9 * scale:
                obj = np.abs(z).sum()
                if obj < best_obj:
                    full = np.zeros(n_cols, dtype=complex)
                    full[list(sup)] = z
                    best_obj, best_z = obj, full
    return best_obj, best_z


def bpdn_support_oracle(a, y, eps, kmax):
    """Min-l1 over supports of size <= kmax inside the residual ball (SLSQP)."""
    best = np.inf
    for k in range(1, kmax + 1):
        for sup in itertools.combinations(range(a.shape[1]), k):
            sub = a[:, sup]

            def unpack(x):
                return x[:k] + 1j * x[k:]

            def obj(x):
                return np.abs(unpack(x)).sum()

            def feas(x):
                return eps - np.linalg.norm(sub @ unpack(x) - y)

            z0, *_ = np.linalg.lstsq(sub, y, rcond=None)
            if np.linalg.norm(sub @ z0 - y) > eps + 1e-12:
                continue
            x0 = np.concatenate([z0.real, z0.imag])
            res = minimize(obj, x0, constraints=[{"type": "ineq", "fun": feas}],
                           method="SLSQP", options={"maxiter": 200, "ftol": 1e-12})
            if res.success and feas(res.x) > -1e-9:
                best = min(best, obj(res.x))
    return best


class TestBpdnBasics:
    def test_zero_data(self):
        a = fourier_dictionary(4, 6, seed=1)
        sol = bpdn_solve(SparseProblem(matrix=a, data=np.zeros(4, dtype=complex)))
        assert np.all(sol.z == 0)
        assert sol.converged

    def test_identity_dictionary(self):
        y = np.array([1 + 1j, -2.0, 0.5j])
        sol = bpdn_solve(SparseProblem(matrix=np.eye(3, dtype=complex), data=y), tol=1e-10)
        np.testing.assert_allclose(sol.z, y, atol=1e-7)
        assert sol.converged

    def test_unit_column_validation(self):
        with pytest.raises(ValueError):
            SparseProblem(matrix=2 * np.eye(3, dtype=complex), data=np.zeros(3))
        m, norms = normalize_columns(2 * np.eye(3, dtype=complex))
        np.testing.assert_allclose(norms, 2.0)
        SparseProblem(matrix=m, data=np.zeros(3))

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            SparseProblem(matrix=np.eye(2, dtype=complex), data=np.zeros(2), epsilon=-1.0)

    def test_feasibility_of_converged_solutions(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            a = fourier_dictionary(6, 8, seed=seed)
            z = np.zeros(8, dtype=complex)
            z[rng.choice(8, 2, replace=False)] = rng.uniform(1, 2, 2)
            eps = 0.05
            e = rng.standard_normal(6) + 1j * rng.standard_normal(6)
            y = a @ z + e * (eps / np.linalg.norm(e))
            sol = bpdn_solve(SparseProblem(matrix=a, data=y, epsilon=eps))
            assert sol.converged
            assert sol.residual <= eps * (1 + 1e-6) + 1e-6 * np.linalg.norm(y)

    def test_support_reporting_floor(self):
        a = np.eye(4, dtype=complex)
        y = np.array([1.0, 1e-9, 0, 0], dtype=complex)
        sol = bpdn_solve(SparseProblem(matrix=a, data=y), tol=1e-10)
        assert sol.support.tolist() == [0]

    @given(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
           st.floats(0, 5))
    @settings(max_examples=60, deadline=None)
    def test_shrinkage_magnitude_and_phase(self, z, t):
        out = _soft_threshold(np.array([z]), t)[0]
        assert abs(out) == pytest.approx(max(abs(z) - t, 0.0), abs=1e-9)
        if abs(z) > t > 0 and abs(z) > 1e-6:
            assert np.angle(out) == pytest.approx(np.angle(z), abs=1e-9)


class TestBpdnAgainstOracles:
    def test_exact_match_on_small_basis_pursuit(self):
        # equality-constrained enumeration oracle over supports of size <= 3
        for seed in range(12):
            rng = np.random.default_rng(seed)
            a = fourier_dictionary(6, 8, seed=seed)
            z = np.zeros(8, dtype=complex)
            z[rng.choice(8, 2, replace=False)] = rng.uniform(1, 2, 2)
            y = a @ z
            sol = bpdn_solve(SparseProblem(matrix=a, data=y), tol=1e-10, max_iters=200_000)
            obj, _ = bp_enumeration_oracle(a, y, 3)
            assert sol.converged
            assert abs(sol.objective - obj) <= 1e-6

    def test_objective_never_above_noisy_oracle(self):
        for seed in range(3):
            rng = np.random.default_rng(100 + seed)
            a = fourier_dictionary(6, 8, seed=200 + seed)
            z = np.zeros(8, dtype=complex)
            z[rng.choice(8, 2, replace=False)] = rng.uniform(1, 2, 2)
            eps = 0.1
            e = rng.standard_normal(6) + 1j * rng.standard_normal(6)
            y = a @ z + e * (eps / np.linalg.norm(e))
            sol = bpdn_solve(SparseProblem(matrix=a, data=y, epsilon=eps), tol=1e-10)
            oracle = bpdn_support_oracle(a, y, eps, 3)
            assert sol.objective <= oracle + 1e-6


class TestOmp:
    def test_single_atom(self):
        a = fourier_dictionary(6, 9, seed=4)
        y = (2.0 - 1.0j) * a[:, 5]
        sol = omp_solve(SparseProblem(matrix=a, data=y), s=1)
        assert sol.support.tolist() == [5]
        assert sol.z[5] == pytest.approx(2.0 - 1.0j, abs=1e-12)

    def test_exact_support_under_guarantee(self):
        # low-coherence dictionary, margin condition holds with s = 2
        found = 0
        for seed in range(20):
            a = low_coherence_dictionary(seed)
            mu = mutual_coherence(a).mu
            rng = np.random.default_rng(1000 + seed)
            sup = np.sort(rng.choice(9, 2, replace=False))
            z = np.zeros(9, dtype=complex)
            z[sup] = rng.uniform(1, 2, 2) * np.exp(2j * np.pi * rng.uniform(size=2))
            z_min = np.abs(z[sup]).min()
            eps = 0.05 * z_min
            e = rng.standard_normal(8) + 1j * rng.standard_normal(8)
            y = a @ z + e * (eps / np.linalg.norm(e))
            margin, ok = omp_guarantee(mu, 2, eps / z_min)
            if not ok:
                continue
            found += 1
            sol = omp_solve(SparseProblem(matrix=a, data=y, epsilon=eps), s=2)
            assert np.array_equal(sol.support, sup)
        assert found == 20

    def test_guarantee_margin_turns_negative(self):
        margin, ok = omp_guarantee(0.25, 4, 0.0)
        assert margin < 0 and not ok
        # necessity bound: s must stay below 1/2 + 1/(2 mu)
        assert 4 >= 0.5 + 0.5 / 0.25

    def test_deterministic_tie_breaking(self):
        a = np.eye(4, dtype=complex)[:, [0, 0, 1, 2]]  # duplicated first atom
        y = np.array([1.0, 0, 0, 0], dtype=complex)
        sol_a = omp_solve(SparseProblem(matrix=a, data=y), s=1)
        sol_b = omp_solve(SparseProblem(matrix=a, data=y), s=1)
        assert sol_a.support.tolist() == [0] == sol_b.support.tolist()
        assert sol_a.tie_broken

    def test_stops_inside_feasibility_ball(self):
        a = fourier_dictionary(6, 9, seed=6)
        y = 1.5 * a[:, 2]
        sol = omp_solve(SparseProblem(matrix=a, data=y, epsilon=1e-9), s=4)
        assert sol.iterations == 1


class TestErrorConstants:
    def test_isometric_limit(self):
        c = bpdn_error_constants(0.0, 0.0)
        assert c.condition_met
        assert c.c1 == pytest.approx(2.0)
        assert c.c2 == pytest.approx(4.0)

    def test_moderate_constants_met(self):
        c = bpdn_error_constants(0.3, 0.3)
        assert c.condition_value == pytest.approx(
            math.sqrt(2) / 2 * 0.3 + (math.sqrt(2) / 2 + 1) * 0.3)
        assert c.condition_value == pytest.approx(0.7243, abs=1e-4)
        assert c.condition_met

    def test_large_constants_unmet(self):
        c = bpdn_error_constants(0.5, 0.5)
        assert c.condition_value == pytest.approx(1.2071, abs=1e-4)
        assert not c.condition_met
        assert c.c1 is None and c.c2 is None

    def test_accepts_ric_estimate(self):
        a = low_coherence_dictionary(3)
        est = ric_bruteforce(a, 4)
        c = bpdn_error_constants(est)
        assert c.condition_met


class TestErrorBound:
    def certified_problem(self, seed, eps_scale=0.0, compressible=False):
        a = low_coherence_dictionary(seed)
        est = ric_bruteforce(a, 4)
        constants = bpdn_error_constants(est)
        assert constants.condition_met
        rng = np.random.default_rng(seed + 5000)
        z = np.zeros(9, dtype=complex)
        sup = rng.choice(9, 2, replace=False)
        z[sup] = rng.uniform(1, 2, 2) * np.exp(2j * np.pi * rng.uniform(size=2))
        if compressible:
            z += 0.01 * (rng.standard_normal(9) + 1j * rng.standard_normal(9))
        eps = 0.0
        y = a @ z
        if eps_scale > 0:
            eps = eps_scale
            e = rng.standard_normal(8) + 1j * rng.standard_normal(8)
            y = y + e * (eps / np.linalg.norm(e))
        return SparseProblem(matrix=a, data=y, epsilon=eps), z, constants

    def test_noiseless_sparse_recovery_is_exact(self):
        for seed in range(10):
            problem, z, constants = self.certified_problem(seed)
            sol = bpdn_solve(problem, tol=1e-10, max_iters=200_000)
            assert np.linalg.norm(sol.z - z) <= 1e-6
            report = verify_bpdn_bound(problem, sol, z, constants, s=2)
            assert report["satisfied"]

    def test_compressible_defect_term(self):
        for seed in range(10):
            problem, z, constants = self.certified_problem(seed, compressible=True)
            sol = bpdn_solve(problem, tol=1e-10, max_iters=200_000)
            report = verify_bpdn_bound(problem, sol, z, constants, s=2)
            assert report["noise_term"] == 0.0
            assert report["error"] <= report["sparse_term"] + 1e-9

    def test_noise_sweep_bound_holds(self):
        for seed in range(30):
            problem, z, constants = self.certified_problem(seed, eps_scale=0.05)
            sol = bpdn_solve(problem, tol=1e-9)
            report = verify_bpdn_bound(problem, sol, z, constants, s=2)
            assert report["satisfied"]

    def test_best_sparse_approximation(self):
        z = np.array([3.0, -1.0, 0.5j, 2.0])
        out = best_sparse_approximation(z, 2)
        assert out.tolist() == [3.0, 0, 0, 2.0]

    def test_unmet_condition_rejected(self):
        problem, z, _ = self.certified_problem(0)
        sol = bpdn_solve(problem)
        bad = bpdn_error_constants(0.5, 0.5)
        with pytest.raises(ValueError):
            verify_bpdn_bound(problem, sol, z, bad, s=2)


class TestRoundTrip:
    def test_problem_and_solution_json(self):
        a = fourier_dictionary(4, 6, seed=9)
        rng = np.random.default_rng(0)
        y = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        problem = SparseProblem(matrix=a, data=y, epsilon=0.1)
        back = problem_from_json(problem_to_json(problem))
        np.testing.assert_allclose(back.matrix, problem.matrix)
        np.testing.assert_allclose(back.data, problem.data)
        assert back.epsilon == problem.epsilon
        sol = omp_solve(problem, s=2)
        sol_back = solution_from_json(solution_to_json(sol))
        np.testing.assert_allclose(sol_back.z, sol.z)
        assert sol_back.support.tolist() == sol.support.tolist()
        assert json.loads(solution_to_json(sol))["format"] == "sparse-solution/v1"
