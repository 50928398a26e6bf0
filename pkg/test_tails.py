#!/usr/bin/env python
# encoding: utf-8

from stochrec import hiddenrv
from stochrec.hiddenrv.errors import ConfigError
from stochrec.hiddenrv.mc import ImportanceEngine, SampleBatch, SimulationConfig, simulate_stationary
from stochrec.hiddenrv.mgf import PhiEvaluator, phi, solve_tail_indices
from stochrec.hiddenrv.tails import (
    ScanResult, check_t_grid, fit_slope, flip_signs, joint_tail_scan,
    k_invariance_check, marginal_tail_scan, mixed_moment, product_tail_index,
    spectral_measure,
    )
import numpy as np
import unittest


FULL_GROUP = ((-1, -1), (-1, 1), (1, -1), (1, 1))
XI_STAR = (2.0 / 3.0, 2.0 / 3.0)


def model ():
    return hiddenrv.log_gaussian(m=(-0.5, -0.5), C=((1.0, 0.5), (0.5, 1.0)))


def pareto_batch (n=200_000, seed=11, signs=None):
    """
    independent standard Pareto(1) coordinates, P(X_i > t) = 1/t
    """
    rng = np.random.default_rng(seed)
    xs = rng.pareto(1.0, size=(n, 2)) + 1.0
    return SampleBatch.build(model(), (1.0, 1.0), xs, {}, np.ones((1, 2), dtype=int) if signs is None else signs)


def simulated_batch (spec, alpha=(1.0, 1.0), seed=3):
    """
    20000 stationary draws, thinned so that successive draws of a chain
    are nearly independent
    """
    cfg = SimulationConfig(n_samples=20_000, burn_in=200, n_chains=2_000, thinning=20, seed=seed)
    return simulate_stationary(spec, alpha, cfg)


def balanced_batch (n=2_000, seed=5):
    """
    the same magnitudes repeated in all four sign cells
    """
    rng = np.random.default_rng(seed)
    x = rng.pareto(1.0, size=(n, 2)) + 1.0
    xs = np.concatenate([x * np.array(g) for g in FULL_GROUP])
    return SampleBatch.build(model(), (1.0, 1.0), xs, {}, np.array(FULL_GROUP))


class TestGrid (unittest.TestCase):

    def test_grid_must_increase (self):
        with self.assertRaises(ConfigError):
            check_t_grid([10.0, 5.0, 3.0])

        with self.assertRaises(ConfigError):
            check_t_grid([0.0, 1.0])

        with self.assertRaises(ConfigError):
            check_t_grid([])

        self.assertTrue(check_t_grid([1, 2, 3]).tolist() == [1.0, 2.0, 3.0])


class TestScans (unittest.TestCase):

    def test_marginal_power_law (self):
        batch = pareto_batch()
        scan = marginal_tail_scan(batch, 1, [2.0, 5.0, 10.0, 20.0])

        self.assertTrue(scan.kind == "marginal1" and scan.exponent == 1.0)
        self.assertFalse(scan.insufficient_tail)
        self.assertTrue(np.all(np.abs(scan.scaled - 1.0) < 5.0 * scan.scaled_stderr))


    def test_marginal_component (self):
        with self.assertRaises(ConfigError):
            marginal_tail_scan(pareto_batch(n=100), 3, [2.0, 5.0])


    def test_joint_independent (self):
        batch = pareto_batch()
        scan = joint_tail_scan(batch, None, (1.0, 1.0), [2.0, 4.0, 8.0])

        self.assertTrue(scan.kind == "joint" and scan.exponent == 2.0)
        self.assertTrue(scan.estimator == "crude")
        self.assertFalse(scan.log_factor)
        self.assertTrue(np.all(np.abs(scan.scaled - 1.0) < 5.0 * scan.scaled_stderr))
        self.assertTrue(np.allclose(scan.rescaled(), scan.scaled))


    def test_log_factor_needs_large_t (self):
        with self.assertRaises(ConfigError):
            joint_tail_scan(pareto_batch(n=100), None, (1.0, 1.0), [0.5, 2.0], use_log_factor=True)


    def test_short_tail_switches_to_engine (self):
        engine = ImportanceEngine(model(), (1.0, 1.0), XI_STAR, SimulationConfig(n_samples=2_000, seed=3))
        scan = joint_tail_scan(pareto_batch(n=100), None, XI_STAR, [50.0, 100.0], engine=engine)

        self.assertTrue(scan.estimator == "importance")
        self.assertTrue(np.all(scan.raw > 0.0))
        self.assertTrue(scan.descriptor()["xi"] == list(XI_STAR))


    def test_short_tail_without_engine (self):
        scan = joint_tail_scan(pareto_batch(n=100), None, (1.0, 1.0), [50.0, 100.0])
        self.assertTrue(scan.insufficient_tail)
        self.assertTrue(scan.estimator == "crude")


    def test_fit_slope (self):
        t = np.array([10.0, 100.0, 1000.0, 10000.0])
        raw = t ** -2.5
        scan = ScanResult(t=t, raw=raw, stderr=0.01 * raw, scaled=ScanResult.scale(t, raw, 2.0, False), exponent=2.0)
        slope, stderr = fit_slope(scan)

        self.assertAlmostEqual(slope, -0.5, places=8)
        self.assertTrue(stderr > 0.0)


    def test_frame_columns (self):
        scan = marginal_tail_scan(pareto_batch(n=1_000), 2, [2.0, 4.0])
        self.assertTrue(list(scan.to_frame().columns) == ["t", "raw", "stderr", "scaled", "estimator"])


class TestSpectral (unittest.TestCase):

    def test_masses_are_a_distribution (self):
        batch = pareto_batch(n=50_000)
        s0 = float(np.quantile(batch.polar[:, 0], 0.9))
        est = spectral_measure(batch, s0)

        self.assertTrue(est.n_exceed > 0)
        self.assertTrue(0.0 <= est.mass_near_axes <= 1.0)
        self.assertAlmostEqual(float(est.masses.sum()), 1.0, places=9)
        self.assertTrue(est.sectors == [(1, 1)])
        self.assertTrue(est.counts.shape == (1, 64))


    def test_orbits_merge_sectors (self):
        est = spectral_measure(balanced_batch(), 2.0)

        self.assertTrue(len(est.sectors) == 4)
        self.assertTrue(len(est.orbit_counts) == 1)
        self.assertTrue(sum(est.orbit_counts.values()) == int(est.counts.sum()))


class TestInvariance (unittest.TestCase):

    def test_balanced_cells_pass (self):
        table = k_invariance_check(balanced_batch())

        self.assertTrue(len(table.cells) == 4)
        self.assertTrue(table.dof == 3)
        self.assertAlmostEqual(table.statistic, 0.0)
        self.assertTrue(table.passed)


    def test_simulated_bekk_diag_passes (self):
        # independent A1 and A2 with symmetric laws make all four sign cells alike
        spec = hiddenrv.bekk_diag(lags=(((0.6, 0.0), (0.0, 0.6)), ((0.6, 0.0), (0.0, -0.6))))
        batch = simulated_batch(spec, solve_tail_indices(spec).alpha, seed=8)
        table = k_invariance_check(batch)

        self.assertTrue(batch.sign_group == FULL_GROUP)
        self.assertTrue(len(table.cells) == 4 and table.dof == 3)
        self.assertTrue(min(c["count"] for c in table.cells) > 100)
        self.assertTrue(table.passed)


    def test_one_sided_cells_fail (self):
        table = k_invariance_check(pareto_batch(n=20_000), group=FULL_GROUP)
        self.assertFalse(table.passed)


    def test_flip_signs (self):
        batch = pareto_batch(n=100)
        flipped = flip_signs(batch, 0)

        self.assertTrue(np.array_equal(flipped.xs[:, 0], -batch.xs[:, 0]))
        self.assertTrue(np.array_equal(flipped.xs[:, 1], batch.xs[:, 1]))
        self.assertTrue(np.array_equal(flipped.polar[:, 1], -batch.polar[:, 1]))
        self.assertTrue(np.array_equal(flipped.block_norms, batch.block_norms))


class TestMoments (unittest.TestCase):

    def test_constant_batch (self):
        xs = np.tile([2.0, 4.0], (100, 1))
        batch = SampleBatch.build(hiddenrv.constant(a=(0.5, 0.5), b=(1.0, 2.0)), (1.0, 1.0), xs, {}, np.ones((1, 2), dtype=int))
        est = mixed_moment(batch, (1.0, 1.0))

        self.assertAlmostEqual(est.estimate, 8.0)
        self.assertTrue(est.stability)


class TestSimulatedLogGaussian (unittest.TestCase):
    """
    diagnostics on stationary draws of the symmetric log-Gaussian model,
    where α = (1, 1) and ξ* = (2/3, 2/3)
    """

    @classmethod
    def setUpClass (cls):
        cls.batch = simulated_batch(model(), seed=3)
        cls.ev = PhiEvaluator(model(), (1.0, 1.0))


    def test_moment_inside_region (self):
        est = mixed_moment(self.batch, (0.2, 0.5), ev=self.ev)

        self.assertTrue(phi(self.ev, (0.2, 0.5))[0] < 1.0)
        self.assertAlmostEqual(est.tail_index, 0.35 / 0.195, places=6)
        self.assertTrue(est.stability)
        self.assertTrue(est.estimate > 1.0 and est.stderr > 0.0)


    def test_moment_beyond_level_set (self):
        est = mixed_moment(self.batch, (0.8, 0.8), ev=self.ev)

        self.assertTrue(phi(self.ev, (0.8, 0.8))[0] > 1.1)
        self.assertAlmostEqual(est.tail_index, 0.8 / 0.96, places=6)
        self.assertFalse(est.stability)


    def test_moment_batches_agree (self):
        other = simulated_batch(model(), seed=4)
        one = mixed_moment(self.batch, (0.2, 0.2), ev=self.ev)
        two = mixed_moment(other, (0.2, 0.2), ev=self.ev)
        hill = mixed_moment(self.batch, (0.2, 0.2))

        self.assertTrue(one.stability and two.stability)
        self.assertTrue(abs(one.estimate - two.estimate) < 4.0 * np.hypot(one.stderr, two.stderr))
        self.assertTrue(hill.stability)
        self.assertTrue(hill.estimate == one.estimate)
        self.assertTrue(hill.tail_index > 1.0)


    def test_tail_index_on_the_axis (self):
        self.assertAlmostEqual(product_tail_index(self.ev, (0.5, 0.0)), 2.0, places=9)
        self.assertTrue(product_tail_index(self.ev, (0.0, 0.0)) == float("inf"))


    def test_spectral_mass_moves_to_the_axes (self):
        s = self.batch.polar[:, 0]
        low = spectral_measure(self.batch, float(np.quantile(s, 0.9)))
        high = spectral_measure(self.batch, float(np.quantile(s, 0.99)))

        self.assertTrue(high.n_exceed < low.n_exceed)
        self.assertTrue(high.mass_near_axes > low.mass_near_axes + 3.0 * np.hypot(low.mass_stderr, high.mass_stderr))


    def test_marginal_scan_is_flat (self):
        scan = marginal_tail_scan(self.batch, 1, [4.0, 8.0, 16.0, 32.0])
        slope, stderr = fit_slope(scan)

        self.assertFalse(scan.insufficient_tail)
        self.assertTrue(abs(slope) < 0.2 + 4.0 * stderr)


if __name__ == "__main__":
    unittest.main()
