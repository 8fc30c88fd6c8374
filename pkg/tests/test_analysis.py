import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsemusic.analysis import (
    admissible_noise_bound,
    budget_to_json,
    critical_perturbation_ratio,
    empirical_coherence_quantile,
    empirical_restricted_ric,
    gram_floor_bound,
    gram_perturbation_bound,
    margin_lower_bound,
    mutual_coherence,
    nsr_admissible,
    off_support_margin,
    perturbation_budget,
    ric_bruteforce,
    ric_coherence_bound,
    ric_restricted,
    stability_budget,
    subspace_perturbation_report,
    superresolution_limit,
)
from sparsemusic.errors import ConditioningError, EnumerationCapError
from sparsemusic.forward import assemble_data, farfield_pair
from sparsemusic.scene import NoiseSpec, apply_noise, build_planar_grid, draw_directions, draw_scene

MATCHED = np.sqrt(2.0) * np.pi


def partial_fourier(n, n_cols, seed, d=2):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1, 1, size=(n, d))
    if d == 1:
        p = np.arange(1, n_cols + 1, dtype=float)[:, None]
    else:
        side = int(round(math.sqrt(n_cols)))
        g = np.arange(1, side + 1, dtype=float)
        p = np.array([(x, y) for x in g for y in g])
    return np.exp(-1j * np.pi * a @ p.T) / np.sqrt(n)


def planar_instance(side, n, m, s, seed, spacing=10.0):
    grid = build_planar_grid(side, spacing)
    scheme = draw_directions(n, "planar-fourier-directions", seed=seed,
                             omega=MATCHED / spacing, m=m)
    scene = draw_scene(grid, s, seed=seed + 1)
    pair = farfield_pair(grid, scene, scheme)
    return grid, scene, pair


class TestCoherence:
    def test_orthonormal_is_zero(self):
        rep = mutual_coherence(np.eye(5, dtype=complex))
        assert rep.mu == 0.0

    def test_duplicate_column_is_one(self):
        m = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]], dtype=complex)
        rep = mutual_coherence(m)
        assert rep.mu == pytest.approx(1.0)
        assert set(rep.pair) == {0, 1}

    def test_matches_pairwise_loop_oracle(self):
        m = partial_fourier(4, 9, seed=2)
        best, best_pair = -1.0, None
        for i in range(9):
            for j in range(9):
                if i == j:
                    continue
                num = abs(np.vdot(m[:, i], m[:, j]))
                den = np.linalg.norm(m[:, i]) * np.linalg.norm(m[:, j])
                if num / den > best:
                    best, best_pair = num / den, (i, j)
        rep = mutual_coherence(m)
        assert rep.mu == pytest.approx(best, abs=1e-14)
        assert set(rep.pair) == set(best_pair)

    def test_zero_column_rejected(self):
        m = np.zeros((3, 2), dtype=complex)
        m[:, 0] = 1.0
        with pytest.raises(ValueError):
            mutual_coherence(m)


class TestRicBruteforce:
    def test_orthonormal_columns_are_isometric(self):
        rng = np.random.default_rng(4)
        q, _ = np.linalg.qr(rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8)))
        for r in (1, 2, 4):
            est = ric_bruteforce(q, r)
            assert est.delta_minus <= 1e-10
            assert est.delta_plus <= 1e-10

    def test_order_one_is_exact_normalization(self):
        m = partial_fourier(5, 9, seed=6)
        est = ric_bruteforce(m, 1)
        assert est.delta_minus <= 1e-12 and est.delta_plus <= 1e-12

    def test_order_two_matches_closed_form(self):
        # for unit columns the 2x2 principal spectra are 1 +- |inner product|
        m = partial_fourier(6, 9, seed=8)
        gram = m.conj().T @ m
        best = 0.0
        for i in range(9):
            for j in range(i + 1, 9):
                best = max(best, abs(gram[i, j]))
        est = ric_bruteforce(m, 2)
        assert est.delta_minus == pytest.approx(best, abs=1e-12)
        assert est.delta_plus == pytest.approx(best, abs=1e-12)

    def test_monotone_in_order(self):
        m = partial_fourier(8, 16, seed=10)
        prev_minus = prev_plus = 0.0
        for r in (1, 2, 3, 4):
            est = ric_bruteforce(m, r)
            assert est.delta_minus >= prev_minus - 1e-12
            assert est.delta_plus >= prev_plus - 1e-12
            prev_minus, prev_plus = est.delta_minus, est.delta_plus

    def test_cap_enforced(self):
        m = partial_fourier(4, 64, seed=1)
        with pytest.raises(EnumerationCapError):
            ric_bruteforce(m, 5, cap=1000)

    def test_restricted_variant_matches_enumeration(self):
        m = partial_fourier(6, 9, seed=3)
        full = ric_bruteforce(m, 3)
        rest = ric_restricted(m, full.witness_minus)
        assert rest.delta_minus == pytest.approx(full.delta_minus, abs=1e-12)


class TestCoherenceBound:
    def test_order_two_equals_mu(self):
        m = partial_fourier(6, 9, seed=5)
        mu = mutual_coherence(m)
        est = ric_coherence_bound(mu, 2)
        assert est.delta_minus == pytest.approx(mu.mu)

    def test_zero_coherence_vanishes(self):
        est = ric_coherence_bound(0.0, 7)
        assert est.delta_minus == 0.0 and est.delta_plus == 0.0

    def test_dominates_bruteforce(self):
        for seed in range(20):
            m = partial_fourier(6, 12, seed=100 + seed)
            mu = mutual_coherence(m)
            brute = ric_bruteforce(m, 3)
            bound = ric_coherence_bound(mu, 3)
            assert bound.delta_minus >= brute.delta_minus - 1e-12
            assert bound.delta_plus >= brute.delta_plus - 1e-12


class TestMargin:
    def test_orthogonal_off_support_is_one(self):
        rep = off_support_margin(np.eye(5, dtype=complex), np.array([0, 1]))
        assert rep.margin == pytest.approx(1.0)

    def test_full_range_support_is_zero(self):
        m = partial_fourier(3, 9, seed=7)
        rep = off_support_margin(m, np.array([0, 3, 6]))
        assert rep.margin <= 1e-6

    def test_matches_qr_oracle(self):
        _, scene, pair = planar_instance(10, 20, 20, 5, seed=31)
        rep = off_support_margin(pair.phi_ext, scene.support)
        q, _ = np.linalg.qr(pair.phi_ext[:, scene.support])
        best = np.inf
        for j in range(pair.n_grid):
            if j in set(scene.support):
                continue
            col = pair.phi_ext[:, j]
            best = min(best, np.linalg.norm(col - q @ (q.conj().T @ col)))
        assert rep.margin == pytest.approx(best, rel=1e-10)

    def test_rank_deficient_support_rejected(self):
        m = np.ones((4, 3), dtype=complex) / 2.0
        with pytest.raises(ConditioningError):
            off_support_margin(m, np.array([0, 1]))


class TestMarginLowerBound:
    def test_isometric_case_is_one(self):
        assert margin_lower_bound(0.0, 0.0) == pytest.approx(1.0)

    def test_half_half_evaluates(self):
        # 1 - (0.5 * 1.5) / (2 + 0.5 - 0.5) = 5/8
        assert margin_lower_bound(0.5, 0.5) == pytest.approx(0.625)

    def test_below_exact_margin_with_bruteforce_ric(self):
        for seed in range(20):
            _, scene, pair = planar_instance(4, 12, 12, 2, seed=200 + seed)
            rep = off_support_margin(pair.phi_ext, scene.support)
            dm = ric_bruteforce(pair.phi_ext, 3).delta_minus
            dp = ric_bruteforce(pair.phi_ext, 2).delta_plus
            assert rep.margin >= margin_lower_bound(dm, dp) - 1e-9

    @given(st.floats(0, 0.999), st.floats(0, 3.0))
    @settings(max_examples=60, deadline=None)
    def test_quotient_monotone_in_each_constant(self, dm, dp):
        step = 1e-3
        base = margin_lower_bound(dm, dp)
        assert margin_lower_bound(min(dm + step, 1.0), dp) <= base + 1e-12
        assert margin_lower_bound(dm, dp + step) <= base + 1e-12


class TestBudgetAndRatio:
    def test_budget_zero_margin(self):
        assert perturbation_budget(0.0) == 0.0

    def test_budget_at_full_margin(self):
        expected = 0.5 - 0.5 / math.sqrt(math.sqrt(2.0) + 1.0)
        assert perturbation_budget(1.0) == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(0.1782028735, abs=1e-9)

    def test_budget_below_one_fifth_everywhere(self):
        gammas = np.linspace(0, 1, 201)
        vals = [perturbation_budget(g) for g in gammas]
        assert max(vals) < 0.2 < critical_perturbation_ratio()
        assert np.all(np.diff(vals) > 0)

    def test_budget_domain_checked(self):
        with pytest.raises(ValueError):
            perturbation_budget(-0.1)
        with pytest.raises(ValueError):
            perturbation_budget(1.5)

    def test_critical_ratio_root(self):
        rho = critical_perturbation_ratio()
        assert 0.2 < rho < 0.25
        assert abs(1 - 8 * rho + 20 * rho ** 2 - 20 * rho ** 3) <= 1e-10
        roots = np.roots([-20, 20, -8, 1])
        real = roots[np.abs(roots.imag) < 1e-12].real
        assert rho == pytest.approx(float(real[0]), abs=1e-10)
        assert rho == pytest.approx(0.2177, abs=5e-4)


class TestGramBounds:
    def seeded(self, seed, side=5, n=14, m=14, s=3):
        _, scene, pair = planar_instance(side, n, m, s, seed=seed)
        data = assemble_data(pair, scene)
        noisy = apply_noise(data, NoiseSpec(sigma=0.05), seed=seed)
        return scene, pair, data, noisy

    def test_zero_noise_zero_bound(self):
        assert gram_perturbation_bound(0.0, 0.3, 2.0) == 0.0

    def test_hand_value(self):
        assert gram_perturbation_bound(0.1, 0.0, 1.0) == pytest.approx(0.21)

    def test_dominates_measured_gram_perturbation(self):
        for seed in range(20):
            scene, pair, data, noisy = self.seeded(300 + seed)
            cal_e = noisy.y @ noisy.y.conj().T - data.y @ data.y.conj().T
            measured = np.linalg.norm(cal_e, 2)
            dp_phi = ric_restricted(pair.phi_ext, scene.support).delta_plus
            dp_psi = ric_restricted(pair.psi_ext, scene.support).delta_plus
            dp = max(dp_phi, dp_psi)
            bound = gram_perturbation_bound(noisy.epsilon_realized, dp,
                                            scene.amp_max, case="scattering")
            assert measured <= bound + 1e-12

    def test_floor_exact_for_isometric_factors(self):
        phi = np.eye(6, dtype=complex)[:, :3]
        amps = np.array([1.0, 1.5, 2.0])
        y = phi @ np.diag(amps) @ phi.conj().T
        sv = np.linalg.svd(y @ y.conj().T, compute_uv=False)
        assert sv[2] == pytest.approx(1.0)          # xi_min^2 squared eigenvalue
        assert gram_floor_bound(0.0, 1.0, case="scattering") == pytest.approx(1.0)

    def test_floor_below_measured(self):
        for seed in range(20):
            scene, pair, data, _ = self.seeded(400 + seed)
            gram = data.y @ data.y.conj().T
            measured = np.linalg.svd(gram, compute_uv=False)[scene.sparsity - 1]
            dm_phi = ric_restricted(pair.phi_ext, scene.support).delta_minus
            dm_psi = ric_restricted(pair.psi_ext, scene.support).delta_minus
            bound = gram_floor_bound(max(dm_phi, dm_psi), scene.amp_min, case="scattering")
            assert measured >= bound - 1e-12

    def test_floor_vacuous_cases(self):
        assert gram_floor_bound(1.2, 1.0) == 0.0
        assert gram_floor_bound(0.3, 0.0) == 0.0


class TestAdmissibleNoise:
    def test_half_ric_hand_value(self):
        expected = math.sqrt(9.0 / 4.0 + 0.16 / 4.0) - 1.5
        bound = admissible_noise_bound("half-ric", budget=0.16, dynamic_range=1.0)
        assert bound == pytest.approx(expected, abs=1e-15)
        assert bound == pytest.approx(0.013275, abs=2e-6)

    def test_zero_budget_tolerates_nothing(self):
        for case in ("nor", "nsr", "half-ric"):
            bound = admissible_noise_bound(case, budget=0.0, dynamic_range=1.7,
                                           delta_plus=0.2, delta_minus=0.3)
            assert bound == pytest.approx(0.0, abs=1e-15)

    def test_satisfied_flag(self):
        bound, ok = nsr_admissible("half-ric", 0.001, budget=0.16, dynamic_range=1.0)
        assert ok and 0.001 < bound
        _, bad = nsr_admissible("half-ric", 0.5, budget=0.16, dynamic_range=1.0)
        assert not bad

    def test_superresolution_asymptote(self):
        # the admissible ratio collapses to its quadratic-slack asymptote as
        # the lower constant approaches one
        budget, r, dp = 0.17, 2.0, 0.1
        errs = []
        for dm in (0.99, 0.999):
            bound = admissible_noise_bound("nsr", budget=budget, dynamic_range=r,
                                           delta_plus=dp, delta_minus=dm)
            limit = superresolution_limit(dp, dm, budget, r)
            errs.append(abs(bound / limit - 1.0))
        assert errs[0] <= 1e-4
        assert errs[1] <= 1e-6
        assert errs[1] < errs[0]


class TestSubspacePerturbation:
    def instance(self, seed, sigma=0.02, side=5, n=16, m=16, s=3):
        _, scene, pair = planar_instance(side, n, m, s, seed=seed)
        data = assemble_data(pair, scene)
        noisy = apply_noise(data, NoiseSpec(sigma=sigma), seed=seed)
        return scene, data, noisy

    def test_zero_perturbation(self):
        scene, data, _ = self.instance(41, sigma=0.0)
        rep = subspace_perturbation_report(data.y, np.zeros_like(data.y), scene.sparsity)
        assert rep.calE_norm == 0.0
        assert rep.subspace_distance <= 1e-7
        assert all(v == 0 for v in rep.block_norms.values())

    def test_distance_bound_under_critical_ratio(self):
        checked = 0
        for seed in range(30):
            scene, data, noisy = self.instance(500 + seed)
            rep = subspace_perturbation_report(data.y, noisy.noise, scene.sparsity)
            if not rep.condition_206:
                continue
            checked += 1
            bound = 2 * rep.rho * (1 - rep.rho) / (1 - 2 * rep.rho) ** 2
            assert rep.subspace_distance <= bound + 1e-10
            assert rep.subspace_distance_bound == pytest.approx(bound)
            if rep.condition_205:
                assert rep.f_norm <= rep.f_bound + 1e-10
        assert checked >= 20

    def test_spectral_separation_near_one_fifth(self):
        # scale the perturbation so the measured ratio sits just below 1/5
        scene, data, noisy = self.instance(77, sigma=0.05)
        target = 0.19
        e = noisy.noise.copy()
        for _ in range(40):
            rep = subspace_perturbation_report(data.y, e, scene.sparsity)
            if abs(rep.rho - target) < 0.005:
                break
            e = e * math.sqrt(target / rep.rho)
        assert rep.rho < 0.2
        assert rep.condition_206
        assert rep.signal_gap > 0.0


class TestBudgetAssembly:
    def test_budget_report_structure(self):
        _, scene, pair = planar_instance(5, 14, 14, 3, seed=91)
        data = assemble_data(pair, scene)
        noisy = apply_noise(data, NoiseSpec(sigma=0.02), seed=9)
        budget = stability_budget(pair, scene, noisy, ric_method="bruteforce",
                                  enumeration_cap=50_000)
        assert budget.margin is not None and budget.margin > 0
        assert budget.margin >= budget.margin_lower_bound - 1e-9
        assert budget.sigma_min >= budget.sigma_min_bound - 1e-12
        assert budget.calE_norm <= budget.calE_bound + 1e-12
        assert budget.rho_star == pytest.approx(critical_perturbation_ratio())
        doc = budget_to_json(budget)
        assert '"format": "budget/v1"' in doc
        assert '"entries"' in doc

    def test_zeta_extremes_bound_amplitudes(self):
        _, scene, pair = planar_instance(5, 14, 14, 3, seed=93)
        budget = stability_budget(pair, scene)
        dm = ric_restricted(pair.psi_ext, scene.support).delta_minus
        dp = ric_restricted(pair.psi_ext, scene.support).delta_plus
        assert budget.zeta_min ** 2 >= (1 - dm) * scene.amp_min ** 2 - 1e-12
        assert budget.zeta_max ** 2 <= (1 + dp) * scene.amp_max ** 2 + 1e-12


class TestEmpiricalCheckers:
    def test_restricted_ric_median_decreases_with_rows(self):
        medians = []
        for n in (8, 16, 32):
            m = partial_fourier(n, 64, seed=5, d=1)
            medians.append(empirical_restricted_ric(m, 4, 40, seed=11))
        assert medians[0] > medians[1] > medians[2]

    def test_coherence_quantile_decreases_with_rows(self):
        def factory_for(n):
            def factory(rng):
                a = rng.uniform(-1, 1, size=(n, 1))
                p = np.arange(1, 33, dtype=float)[None, :]
                return np.exp(-1j * np.pi * a @ p) / math.sqrt(n)
            return factory

        q_small = empirical_coherence_quantile(factory_for(8), 30, seed=3)
        q_large = empirical_coherence_quantile(factory_for(64), 30, seed=3)
        assert q_large < q_small
