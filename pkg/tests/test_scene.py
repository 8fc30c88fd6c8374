import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import dblquad

from sparsemusic.forward import DataMatrix
from sparsemusic.scene import (
    NoiseSpec,
    apply_noise,
    build_planar_grid,
    direction_from_square,
    draw_directions,
    draw_scene,
    scene_from_json,
    scene_to_json,
    scheme_from_json,
    scheme_to_json,
)


class TestPlanarGrid:
    def test_two_by_two_enumeration(self):
        grid = build_planar_grid(2, 10.0)
        expected = np.array([[10, 10, 0], [10, 20, 0], [20, 10, 0], [20, 20, 0]], dtype=float)
        np.testing.assert_allclose(grid.points, expected)

    def test_search_domain_scale(self):
        grid = build_planar_grid(50, 10.0)
        lo, hi = grid.extent
        assert grid.n_points == 2500
        np.testing.assert_allclose(lo[:2], [10.0, 10.0])
        np.testing.assert_allclose(hi[:2], [500.0, 500.0])

    def test_centered_variant_symmetric(self):
        grid = build_planar_grid(51, 10.0, centered=True)
        lo, hi = grid.extent
        np.testing.assert_allclose(lo[:2], [-250.0, -250.0])
        np.testing.assert_allclose(hi[:2], [250.0, 250.0])

    def test_single_point(self):
        grid = build_planar_grid(1, 3.0)
        assert grid.n_points == 1
        assert grid.index_of(1, 1) == 0

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            build_planar_grid(2, 0.0)
        with pytest.raises(ValueError):
            build_planar_grid(2, -1.0)
        with pytest.raises(ValueError):
            build_planar_grid(0, 1.0)

    @given(st.integers(min_value=1, max_value=9))
    @settings(max_examples=9, deadline=None)
    def test_index_bijection(self, side):
        grid = build_planar_grid(side, 2.5)
        for j in range(grid.n_points):
            p1, p2 = grid.lattice_coords(j)
            assert grid.index_of(p1, p2) == j
            np.testing.assert_allclose(grid.points[j, :2], [p1 * 2.5, p2 * 2.5])

    def test_min_pairwise_distance_is_spacing(self):
        grid = build_planar_grid(5, 7.0)
        d = np.linalg.norm(grid.points[:, None] - grid.points[None, :], axis=2)
        np.fill_diagonal(d, np.inf)
        assert d.min() == pytest.approx(7.0)


class TestDrawScene:
    def test_empty_scene_flagged(self):
        grid = build_planar_grid(4, 1.0)
        scene = draw_scene(grid, 0, seed=3)
        assert scene.sparsity == 0
        with pytest.raises(ValueError):
            scene.amp_min
        with pytest.raises(ValueError):
            scene.amp_max

    def test_amplitude_range(self):
        grid = build_planar_grid(10, 1.0)
        scene = draw_scene(grid, 10, (1.0, 2.0), seed=5)
        assert scene.dynamic_range <= 2.0
        assert 1.0 <= scene.amp_min <= scene.amp_max <= 2.0
        assert np.all(scene.amplitudes.imag == 0)

    def test_seed_determinism(self):
        grid = build_planar_grid(4, 1.0)
        a = draw_scene(grid, 3, seed=11)
        b = draw_scene(grid, 3, seed=11)
        assert np.array_equal(a.support, b.support)
        assert np.array_equal(a.amplitudes, b.amplitudes)

    def test_overfull_rejected(self):
        grid = build_planar_grid(2, 1.0)
        with pytest.raises(ValueError):
            draw_scene(grid, 5, seed=0)
        with pytest.raises(ValueError):
            draw_scene(grid, 1, (0.0, 1.0), seed=0)

    def test_complex_phases_optional(self):
        grid = build_planar_grid(6, 1.0)
        scene = draw_scene(grid, 5, seed=2, complex_phases=True)
        assert np.any(scene.amplitudes.imag != 0)
        mags = np.abs(scene.amplitudes)
        assert np.all((mags >= 1.0) & (mags <= 2.0))


class TestDirections:
    def test_square_map_origin(self):
        np.testing.assert_allclose(direction_from_square(np.array([0.0, 0.0])), [0, 0, 1])

    def test_square_map_corner(self):
        # direct evaluation: a = (1, 1) has |a|^2 = 2, so the z part vanishes
        d = direction_from_square(np.array([1.0, 1.0]))
        np.testing.assert_allclose(d, [1 / np.sqrt(2), 1 / np.sqrt(2), 0], atol=1e-15)
        assert np.linalg.norm(d) == pytest.approx(1.0, abs=1e-12)

    def test_all_directions_unit(self):
        scheme = draw_directions(100, "planar-fourier-directions", seed=7, omega=1.0)
        norms = np.linalg.norm(scheme.points, axis=1)
        assert np.abs(norms - 1.0).max() <= 1e-12

    @given(st.floats(-1, 1), st.floats(-1, 1))
    @settings(max_examples=50, deadline=None)
    def test_square_map_always_unit(self, ax, ay):
        d = direction_from_square(np.array([ax, ay]))
        assert np.linalg.norm(d) == pytest.approx(1.0, abs=1e-12)

    def test_independent_incident_side(self):
        scheme = draw_directions(6, "planar-fourier-directions", seed=1, omega=2.0, m=4)
        assert scheme.incident.shape == (4, 3)
        assert scheme.n_incident == 4
        assert not np.allclose(scheme.incident[:4], scheme.points[:4])

    def test_transceiver_scheme_has_no_incident(self):
        scheme = draw_directions(6, "planar-fourier-directions", seed=1, omega=2.0)
        assert scheme.incident is None
        assert scheme.n_incident == 6

    def test_paraxial_sensors_within_aperture(self):
        scheme = draw_directions(50, "paraxial-sensors", seed=9, omega=2 * np.pi / 0.1,
                                 aperture=100.0, z0=10000.0)
        assert np.all(np.abs(scheme.points[:, :2]) <= 50.0)
        assert np.all(scheme.points[:, 2] == 10000.0)
        assert np.all(np.abs(scheme.square_points) <= 1.0)

    def test_time_samples_in_alphabet(self):
        scheme = draw_directions(40, "time-samples", seed=3, omega=1.0, n_tones=16)
        assert scheme.points.dtype == np.int64
        assert scheme.points.min() >= 1 and scheme.points.max() <= 16

    def test_seed_determinism(self):
        a = draw_directions(20, "planar-fourier-directions", seed=42, omega=1.0)
        b = draw_directions(20, "planar-fourier-directions", seed=42, omega=1.0)
        assert np.array_equal(a.points, b.points)

    def test_needs_at_least_one(self):
        with pytest.raises(ValueError):
            draw_directions(0, "planar-fourier-directions", seed=0, omega=1.0)


class TestNoise:
    def test_zero_noise_identity(self):
        y = DataMatrix(y=np.ones((4, 4), dtype=complex))
        out = apply_noise(y, NoiseSpec(sigma=0.0), seed=1)
        assert np.array_equal(out.y, y.y)
        assert out.epsilon_realized == 0.0

    def test_entry_magnitude_bound(self):
        # uniform complex perturbation of an all-ones matrix: |E| <= sigma*sqrt(2)
        y = np.ones((10, 10), dtype=complex)
        out = apply_noise(y, NoiseSpec(sigma=0.1), seed=5)
        assert np.abs(out.noise).max() <= 0.1 * np.sqrt(2.0) + 1e-15
        assert out.epsilon_realized <= 0.1 * 1.0 * np.sqrt(2 * 10 * 10)

    def test_spectral_norm_bound_many_seeds(self):
        rng = np.random.default_rng(0)
        for seed in range(20):
            y = rng.standard_normal((8, 12)) + 1j * rng.standard_normal((8, 12))
            sigma = 0.3
            out = apply_noise(y, NoiseSpec(sigma=sigma), seed=seed)
            bound = sigma * np.abs(y).max() * np.sqrt(2 * 8 * 12)
            assert out.epsilon_realized <= bound

    def test_mean_entry_magnitude_matches_model(self):
        # oracle: mean of |e1 + i e2| over the square via numeric quadrature
        val, _ = dblquad(lambda v, u: np.hypot(u, v), -1, 1, -1, 1)
        expected = val / 4.0
        y = np.ones((100, 100), dtype=complex)
        out = apply_noise(y, NoiseSpec(sigma=1.0), seed=8)
        measured = np.abs(out.noise).mean()
        assert measured == pytest.approx(expected, rel=0.05)

    def test_snr_scale(self):
        # with entry magnitudes roughly uniform up to the peak, the
        # signal-to-noise ratio is about 1 / (2 sigma^2)
        rng = np.random.default_rng(3)
        mags = rng.uniform(0, 1, size=(120, 120))
        y = mags * np.exp(2j * np.pi * rng.uniform(size=(120, 120)))
        sigma = 1.5
        out = apply_noise(y, NoiseSpec(sigma=sigma), seed=4)
        snr = np.mean(np.abs(y) ** 2) / np.mean(np.abs(out.noise) ** 2)
        assert snr == pytest.approx(0.5 / sigma ** 2, rel=0.1)
        assert snr == pytest.approx(0.22, rel=0.12)

    def test_explicit_matrix_model(self):
        y = np.zeros((2, 2), dtype=complex)
        e = np.array([[1.0, 0], [0, 0]], dtype=complex)
        out = apply_noise(y, NoiseSpec(sigma=0.0, model="explicit-matrix", matrix=e), seed=0)
        assert out.epsilon_realized == pytest.approx(1.0)
        np.testing.assert_allclose(out.y, e)

    def test_noise_seed_determinism(self):
        y = np.ones((5, 5), dtype=complex)
        a = apply_noise(y, NoiseSpec(sigma=0.5), seed=123)
        b = apply_noise(y, NoiseSpec(sigma=0.5), seed=123)
        assert np.array_equal(a.noise, b.noise)

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            NoiseSpec(sigma=-0.1)


class TestSerialization:
    def test_scene_round_trip(self):
        grid = build_planar_grid(4, 2.0)
        scene = draw_scene(grid, 3, seed=2, complex_phases=True)
        text = scene_to_json(scene, grid)
        doc = json.loads(text)
        assert doc["format"] == "scene/v1"
        back, grid_back = scene_from_json(text)
        assert np.array_equal(back.support, scene.support)
        np.testing.assert_allclose(back.amplitudes, scene.amplitudes)
        np.testing.assert_allclose(grid_back.points, grid.points)

    def test_scheme_round_trip(self):
        scheme = draw_directions(5, "paraxial-sensors", seed=6, omega=2 * np.pi / 0.1,
                                 aperture=100.0, z0=10000.0)
        back = scheme_from_json(scheme_to_json(scheme))
        assert back.kind == scheme.kind
        np.testing.assert_allclose(back.points, scheme.points)
        assert back.z0 == scheme.z0
        assert back.seed == 6

    def test_format_key_checked(self):
        with pytest.raises(ValueError):
            scene_from_json(json.dumps({"format": "nope"}))
