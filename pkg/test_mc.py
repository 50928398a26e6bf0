#!/usr/bin/env python
# encoding: utf-8

from scipy import stats
from stochrec import hiddenrv
from stochrec.hiddenrv.errors import ConfigError, NonContracting
from stochrec.hiddenrv.mc import (
    EsscherTilt, ImportanceEngine, SampleBatch, SimulationConfig,
    from_polar, joint_exceedance_prob, norm_alpha, perpetuity_truncated,
    sign_group, simulate_stationary, tilted_walk, to_polar, walk_box_prob,
    )
from stochrec.hiddenrv.mgf import PhiEvaluator
from stochrec.hiddenrv.models import sample_ab
import filecmp
import math
import numpy as np
import os
import tempfile
import unittest


ETA = 0.5
CHOL = np.linalg.cholesky(np.array([[1.0, ETA], [ETA, 1.0]]))
XI_STAR = (2.0 / 3.0, 2.0 / 3.0)


def log_gaussian_spec (seed=7):
    return hiddenrv.log_gaussian(m=(-0.5, -0.5), C=((1.0, ETA), (ETA, 1.0)), seed=seed)


def correlated_log_normal (rng, size):
    z = rng.standard_normal((size, 2)) @ CHOL.T
    return np.exp(-0.5 + z), rng.standard_normal((size, 2))


def correlated_log_mgf (theta):
    cov = CHOL @ CHOL.T
    grad = -0.5 + cov @ theta
    return -0.5 * theta.sum() + 0.5 * theta @ cov @ theta, grad, cov


class TestPolar (unittest.TestCase):

    def test_round_trip (self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((200, 2)) * 5.0
        exponents = np.array([1.0, 2.0])
        polar = to_polar(x, exponents)

        self.assertTrue(np.allclose(from_polar(polar, exponents), x))
        self.assertTrue(np.allclose(norm_alpha(polar[:, 1:], exponents), 1.0))
        self.assertTrue(np.allclose(polar[:, 0], norm_alpha(x, exponents)))


    def test_origin (self):
        polar = to_polar(np.zeros((1, 2)), np.array([1.0, 1.0]))
        self.assertTrue(np.all(polar == 0.0))


    def test_sign_group_closure (self):
        self.assertTrue(sign_group([[1, 1]]) == ((1, 1),))
        self.assertTrue(sign_group([[1, -1]]) == ((1, -1), (1, 1)))
        self.assertTrue(len(sign_group([[-1, 1], [1, -1]])) == 4)
        self.assertTrue(sign_group([[-1, -1]]) == ((-1, -1), (1, 1)))


class TestSimulation (unittest.TestCase):

    def test_config_validation (self):
        with self.assertRaises(ConfigError):
            SimulationConfig(n_samples=0)

        with self.assertRaises(ConfigError):
            SimulationConfig(n_samples=10, thinning=0)

        self.assertTrue("workers" not in SimulationConfig(n_samples=10, workers=3).to_dict())


    def test_constant_model_sits_at_fixed_point (self):
        spec = hiddenrv.constant(a=(0.5, 0.5), b=(1.0, 2.0))
        cfg = SimulationConfig(n_samples=100, burn_in=100, n_chains=16, seed=3)
        batch = simulate_stationary(spec, (1.0, 1.0), cfg)

        self.assertTrue(len(batch) == 100)
        self.assertTrue(np.allclose(batch.xs, [2.0, 4.0]))
        self.assertTrue(batch.sign_group == ((1, 1),))


    def test_non_contracting (self):
        spec = hiddenrv.constant(a=(1.2, 0.5), b=(1.0, 1.0))

        with self.assertRaises(NonContracting):
            simulate_stationary(spec, (1.0, 1.0), SimulationConfig(n_samples=10, burn_in=10, n_chains=4))


    def test_divergence_caught_without_burn_in (self):
        for spec in (hiddenrv.constant(a=(1.2, 0.5), b=(1.0, 1.0)), hiddenrv.log_gaussian(m=(0.1, -0.5), C=((1.0, 0.0), (0.0, 1.0)))):
            with self.assertRaises(NonContracting):
                simulate_stationary(spec, (1.0, 1.0), SimulationConfig(n_samples=10, burn_in=0, n_chains=4))


    def test_same_seed_any_worker_count (self):
        spec = log_gaussian_spec()
        one = simulate_stationary(spec, (1.0, 1.0), SimulationConfig(n_samples=512, burn_in=50, n_chains=128, seed=5, workers=1))
        two = simulate_stationary(spec, (1.0, 1.0), SimulationConfig(n_samples=512, burn_in=50, n_chains=128, seed=5, workers=2))
        other = simulate_stationary(spec, (1.0, 1.0), SimulationConfig(n_samples=512, burn_in=50, n_chains=128, seed=6))

        self.assertTrue(np.array_equal(one.xs, two.xs))
        self.assertFalse(np.array_equal(one.xs, other.xs))
        self.assertTrue(one.meta["config"] == two.meta["config"])


    def test_csv_columns (self):
        spec = log_gaussian_spec()
        batch = simulate_stationary(spec, (1.0, 1.0), SimulationConfig(n_samples=20, burn_in=10, n_chains=4))
        self.assertTrue(list(batch.to_frame().columns) == ["x1", "x2", "s", "omega1", "omega2"])


    def test_cache_is_tied_to_the_model (self):
        spec = log_gaussian_spec()
        cfg = SimulationConfig(n_samples=64, burn_in=10, n_chains=8, seed=2)
        batch = simulate_stationary(spec, (1.0, 1.0), cfg)

        with tempfile.TemporaryDirectory() as folder:
            first = os.path.join(folder, "first.npz")
            second = os.path.join(folder, "second.npz")
            batch.save(first)
            batch.save(second)
            self.assertTrue(filecmp.cmp(first, second, shallow=False))

            loaded = SampleBatch.load(first, spec)
            self.assertTrue(np.array_equal(loaded.xs, batch.xs))
            self.assertTrue(loaded.sign_group == batch.sign_group)

            with self.assertRaises(ConfigError):
                SampleBatch.load(first, hiddenrv.log_gaussian(m=(-0.5, -0.5), C=((1.0, 0.0), (0.0, 1.0))))


class TestPerpetuity (unittest.TestCase):

    def test_single_term_is_b (self):
        spec = hiddenrv.constant(a=(0.5, 0.5), b=(1.0, 2.0))
        batch = perpetuity_truncated(spec, (1.0, 1.0), 1, SimulationConfig(n_samples=10))
        self.assertTrue(np.all(batch.xs == [1.0, 2.0]))
        self.assertTrue(np.all(np.isfinite(batch.meta["tail_bound"])))


    def test_long_sum_reaches_fixed_point (self):
        spec = hiddenrv.constant(a=(0.5, 0.5), b=(1.0, 2.0))
        batch = perpetuity_truncated(spec, (1.0, 1.0), 60, SimulationConfig(n_samples=10))
        self.assertTrue(np.allclose(batch.xs, [2.0, 4.0]))


    def test_needs_a_term (self):
        with self.assertRaises(ConfigError):
            perpetuity_truncated(log_gaussian_spec(), (1.0, 1.0), 0, SimulationConfig(n_samples=10))


    def test_agrees_with_forward_recursion (self):
        spec = log_gaussian_spec(seed=4)
        reference = simulate_stationary(spec, (1.0, 1.0), SimulationConfig(n_samples=5_000, burn_in=200, n_chains=500, thinning=5, seed=4))
        batch = perpetuity_truncated(spec, (1.0, 1.0), 200, SimulationConfig(n_samples=5_000, seed=9), reference=reference)
        self.assertTrue(max(batch.meta["ks"]) < 0.08)


class TestTilt (unittest.TestCase):

    def test_exact_tilt_drift_is_diagonal (self):
        ev = PhiEvaluator(log_gaussian_spec(), (1.0, 1.0))
        tilt = EsscherTilt.build(ev, XI_STAR)
        self.assertTrue(tilt.exact)
        self.assertTrue(np.allclose(tilt.drift, [0.5, 0.5]))

        u, k = tilt.sample(np.random.default_rng(0), 1_000_000)
        mean = u.mean(axis=0)
        self.assertTrue(abs(mean[0] - mean[1]) / np.linalg.norm(mean) < 0.02)
        self.assertTrue(np.all(np.abs(mean - tilt.drift) < 4.0 * u.std(axis=0) / 1000.0))


    def test_tilt_needs_level_point (self):
        ev = PhiEvaluator(log_gaussian_spec(), (1.0, 1.0))

        with self.assertRaises(ConfigError):
            EsscherTilt.build(ev, (0.3, 0.3))


    def test_rejection_tilt (self):
        spec = hiddenrv.custom(correlated_log_normal, independent=True, log_mgf=correlated_log_mgf, seed=1)
        ev = PhiEvaluator(spec, (1.0, 1.0))
        tilt = EsscherTilt.build(ev, XI_STAR, seed=1)
        self.assertFalse(tilt.exact)
        self.assertTrue(tilt.window > 1.0)

        u, k = tilt.sample(np.random.default_rng(3), 20_000)
        self.assertTrue(u.shape == (20_000, 2))
        self.assertTrue(np.all(np.abs(u.mean(axis=0) - 0.5) < 0.05))


    def test_zero_tilt_is_the_base_law (self):
        models = (log_gaussian_spec(), hiddenrv.custom(correlated_log_normal, independent=True, log_mgf=correlated_log_mgf, seed=1))

        for spec in models:
            ev = PhiEvaluator(spec, (1.0, 1.0))
            tilt = EsscherTilt.build(ev, (0.0, 0.0))
            self.assertTrue(tilt.window == 1.0)
            self.assertTrue(np.allclose(tilt.drift, [-0.5, -0.5]))

            u, _ = tilt.sample(np.random.default_rng(5), 5_000)
            base = sample_ab(spec, np.random.default_rng(6), 5_000).with_alpha(ev.alpha).u

            for j in (0, 1):
                self.assertTrue(stats.ks_2samp(u[:, j], base[:, j]).pvalue > 1e-3)


    def test_walk_path (self):
        ev = PhiEvaluator(log_gaussian_spec(), (1.0, 1.0))
        tilt = EsscherTilt.build(ev, XI_STAR)
        path = tilted_walk(ev.spec, ev.alpha, tilt, 50, np.random.default_rng(1))
        self.assertTrue(path.s.shape == (51, 2))
        self.assertTrue(np.all(path.s[0] == 0.0))
        self.assertTrue(np.all(path.l == 1))


class TestExceedance (unittest.TestCase):

    def test_importance_matches_crude (self):
        spec = log_gaussian_spec()
        cfg = SimulationConfig(n_samples=20_000, seed=7)
        result = joint_exceedance_prob(spec, (1.0, 1.0), XI_STAR, 5.0, 1.0, cfg)

        self.assertTrue(result.estimate > 0.0 and result.crude > 0.0)
        self.assertTrue(result.n_cap == math.ceil(4.0 * math.log(5.0) / 0.5))
        self.assertTrue(abs(result.estimate - result.crude) < 4.0 * math.hypot(result.stderr, result.crude_stderr))


    def test_needs_large_t (self):
        with self.assertRaises(ConfigError):
            joint_exceedance_prob(log_gaussian_spec(), (1.0, 1.0), XI_STAR, 1.0, 1.0, SimulationConfig(n_samples=10))


    def test_engine_reuses_tilt (self):
        spec = log_gaussian_spec()
        engine = ImportanceEngine(spec, (1.0, 1.0), XI_STAR, SimulationConfig(n_samples=4_000, seed=1))
        small = engine.estimate(100.0)
        large = engine.estimate(1000.0)

        self.assertTrue(small.crude is None)
        self.assertTrue(small.estimate > large.estimate > 0.0)
        self.assertFalse(large.zero_hits)


    def test_box_gaussian_term (self):
        # Gaussian increments make the leading term exact
        spec = log_gaussian_spec()
        box = walk_box_prob(spec, (1.0, 1.0), XI_STAR, 100.0, 0, 1.0, SimulationConfig(n_samples=20_000, seed=3))

        self.assertTrue(box.n0 == 10 and box.n == 10)
        self.assertTrue(np.allclose(box.corner, [5.0, 5.0]))
        self.assertTrue(box.mc > 0.0 and box.gauss > 0.0)
        self.assertTrue(abs(box.mc - box.gauss) < 4.0 * box.mc_stderr + 1e-6 * box.gauss)


    def test_exceedance_decreases_in_eps (self):
        spec = log_gaussian_spec()
        cfg = SimulationConfig(n_samples=20_000, seed=11)
        level = joint_exceedance_prob(spec, (1.0, 1.0), XI_STAR, 1000.0, 1.0, cfg, crude=False)
        higher = joint_exceedance_prob(spec, (1.0, 1.0), XI_STAR, 1000.0, 2.0, cfg, crude=False)

        self.assertTrue(higher.estimate > 0.0)
        self.assertTrue(higher.estimate + 3.0 * math.hypot(level.stderr, higher.stderr) < level.estimate)


    def test_box_scales_with_eps (self):
        spec = log_gaussian_spec()
        cfg = SimulationConfig(n_samples=50_000, seed=5)
        unit = walk_box_prob(spec, (1.0, 1.0), XI_STAR, 1e6, 0, 1.0, cfg)
        moved = walk_box_prob(spec, (1.0, 1.0), XI_STAR, 1e6, 0, math.e, cfg)
        expected = math.exp(-XI_STAR[1])

        self.assertTrue(unit.n0 == 28)
        self.assertTrue(np.allclose(moved.corner - unit.corner, [0.0, 1.0]))
        self.assertAlmostEqual(moved.weight / unit.weight, expected, places=12)

        # the Gaussian density only thins slightly one unit off the mean
        gauss_ratio = moved.gauss / unit.gauss
        self.assertTrue(0.9 * expected < gauss_ratio < expected)

        ratio = moved.mc / unit.mc
        spread = math.hypot(moved.mc_stderr / moved.mc, unit.mc_stderr / unit.mc)
        self.assertTrue(abs(ratio - gauss_ratio) < 4.0 * spread * ratio)


    def test_box_decreases_along_diagonal (self):
        spec = log_gaussian_spec()
        cfg = SimulationConfig(n_samples=20_000, seed=6)
        boxes = [walk_box_prob(spec, (1.0, 1.0), XI_STAR, 100.0, 0, 1.0, cfg, shift=shift) for shift in (0.0, 0.5, 1.0)]

        for near, far in zip(boxes, boxes[1:]):
            self.assertTrue(far.gauss < near.gauss)
            self.assertTrue(far.mc + 3.0 * math.hypot(near.mc_stderr, far.mc_stderr) < near.mc)


    def test_box_offset_bound (self):
        with self.assertRaises(ConfigError):
            walk_box_prob(log_gaussian_spec(), (1.0, 1.0), XI_STAR, 100.0, 4, 1.0, SimulationConfig(n_samples=10))


if __name__ == "__main__":
    unittest.main()
