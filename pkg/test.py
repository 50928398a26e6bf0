#!/usr/bin/env python
# encoding: utf-8

from stochrec import hiddenrv
from stochrec.hiddenrv.errors import ConfigError, NegativeDriftViolated, NoRoot, OpenArc, Unsupported
from stochrec.hiddenrv.hiddenrv import HiddenRVAPI, load_settings, parse_t_grid
from stochrec.hiddenrv.levelset import find_xi_star, trace_level_set
from stochrec.hiddenrv.mgf import MONTE_CARLO, PhiEvaluator, TailIndices, check_assumptions, grad_phi, phi, psi, running_moment, solve_alpha, solve_tail_indices
from stochrec.hiddenrv.models import closed_form_log_mgf, sample_ab, spec_from_config
import configparser
import numpy as np
import os
import tempfile
import unittest


def symmetric_log_gaussian (eta, seed=0):
    return hiddenrv.log_gaussian(m=(-0.5, -0.5), C=((1.0, eta), (eta, 1.0)), seed=seed)


BEKK_LAGS = (((0.6, 0.0), (0.0, 0.4)), ((0.3, 0.0), (0.0, 0.7)))


def unit_indices ():
    return TailIndices(alpha=np.ones(2), solver=({"residual": 0.0}, {"residual": 0.0}))


LOG_GAUSSIAN_CFG = """
[model]
family = log_gaussian
m = [-0.5, -0.5]
C = [[1.0, 0.5], [0.5, 1.0]]
seed = 11
"""

CONSTANT_CFG = """
[model]
family = constant
a = [0.9, 0.9]
b = [1.0, 1.0]
"""


def write_config (folder, text, name="sre.cfg"):
    path = os.path.join(folder, name)

    with open(path, "w") as f:
        f.write(text)

    return path


class TestModels (unittest.TestCase):

    def test_log_gaussian_needs_positive_definite_c (self):
        with self.assertRaises(ConfigError):
            hiddenrv.log_gaussian(m=(-0.5, -0.5), C=((1.0, 2.0), (2.0, 1.0)))


    def test_ccc_garch_rejects_nonpositive_parameters (self):
        with self.assertRaises(ConfigError):
            hiddenrv.ccc_garch(a=(1.0, 1.0), b=(0.5, 0.0), c=(0.5, 0.5), eta=0.5)

        with self.assertRaises(ConfigError):
            hiddenrv.ccc_garch(a=(1.0, 1.0), b=(0.5, 0.5), c=(0.5, 0.5), eta=1.0)


    def test_config_families (self):
        with self.assertRaises(ConfigError):
            spec_from_config({"family": "garch_of_the_future"})

        with self.assertRaises(ConfigError):
            spec_from_config({"family": "constant", "a": [0.5, 0.5], "b": [1, 1], "colour": "red"})

        with self.assertRaises(ConfigError):
            spec_from_config({"family": "ccc_garch", "a": [1, 1], "b": [0.5, 0.5]})


    def test_blocks_are_one_based_in_config (self):
        spec = spec_from_config({"family": "constant", "a": [0.5, 0.5, 0.5], "b": [1, 1, 1], "blocks": [[1, 3], [2]]})
        self.assertTrue(spec.blocks == ((0, 2), (1,)))
        self.assertTrue(spec.block_of.tolist() == [0, 1, 0])


    def test_blocks_must_partition (self):
        with self.assertRaises(ConfigError):
            spec_from_config({"family": "constant", "a": [0.5, 0.5, 0.5], "b": [1, 1, 1], "blocks": [[1], [2]]})


    def test_sample_shapes_and_signs (self):
        spec = hiddenrv.bekk_diag(lags=BEKK_LAGS, seed=1)
        draw = sample_ab(spec, np.random.default_rng(1), 500)
        self.assertTrue(draw.a.shape == (500, 2))
        self.assertTrue(draw.b.shape == (500, 2))
        self.assertTrue(set(np.unique(draw.k).tolist()) == {-1, 1})


    def test_constant_family_draws (self):
        spec = hiddenrv.constant(a=(0.5, 0.5), b=(1.0, 2.0))
        draw = sample_ab(spec, np.random.default_rng(0), 4)
        self.assertTrue(np.all(draw.a == 0.5))
        self.assertTrue(np.all(draw.b == [1.0, 2.0]))
        self.assertTrue(spec.family.deterministic)


    def test_fingerprint_follows_parameters (self):
        one = symmetric_log_gaussian(0.5)
        two = symmetric_log_gaussian(0.5)
        three = symmetric_log_gaussian(0.6)
        self.assertTrue(one.fingerprint() == two.fingerprint())
        self.assertTrue(one.fingerprint() != three.fingerprint())


    def test_closed_form_log_mgf (self):
        spec = symmetric_log_gaussian(0.5)
        self.assertAlmostEqual(closed_form_log_mgf(spec, (1.0, 0.0)), 0.0, places=14)
        self.assertAlmostEqual(closed_form_log_mgf(spec, (1.0, 1.0)), -1.0 + 1.5, places=14)
        self.assertTrue(closed_form_log_mgf(hiddenrv.ccc_garch((1, 1), (0.5, 0.5), (0.5, 0.5), 0.5), (1.0, 0.0)) is None)


class TestTailIndices (unittest.TestCase):

    def test_log_gaussian_closed_form (self):
        alpha = solve_tail_indices(symmetric_log_gaussian(0.5))
        self.assertAlmostEqual(alpha.alpha[0], 1.0, places=9)
        self.assertAlmostEqual(alpha.alpha[1], 1.0, places=9)
        self.assertTrue(alpha.residual() < 1e-9)
        self.assertTrue(alpha.solver[0]["method"] == "closed_form")


    def test_log_gaussian_uneven_drift (self):
        # α_i = -2 m_i for unit variances
        spec = hiddenrv.log_gaussian(m=(-0.5, -1.5), C=((1.0, 0.0), (0.0, 1.0)))
        root, info = solve_alpha(spec, 2)
        self.assertAlmostEqual(root, 3.0, places=9)


    def test_root_is_polished (self):
        spec = hiddenrv.log_gaussian(m=(-0.5, -1.5), C=((1.0, 0.0), (0.0, 1.0)))
        root, info = solve_alpha(spec, 2)
        self.assertAlmostEqual(root, 3.0, places=12)
        self.assertTrue(info["residual"] < 1e-13)
        self.assertTrue(isinstance(info["iterations"], int))


    def test_bekk_diag_quadrature (self):
        alpha = solve_tail_indices(hiddenrv.bekk_diag(lags=BEKK_LAGS))
        self.assertTrue(alpha.residual() < 1e-10)
        self.assertTrue(alpha.solver[0]["method"] == "quadrature")


    def test_ccc_garch_quadrature (self):
        spec = hiddenrv.ccc_garch(a=(1.0, 1.0), b=(0.5, 0.5), c=(0.5, 0.5), eta=0.5)
        alpha = solve_tail_indices(spec)
        self.assertTrue(np.abs(alpha.alpha - 1.0).max() < 1e-6)
        self.assertTrue(alpha.solver[1]["method"] == "quadrature")


    def test_monte_carlo_fallback (self):
        spec = symmetric_log_gaussian(0.5, seed=5)
        root, info = solve_alpha(spec, 1, method=MONTE_CARLO, n=200_000)
        self.assertTrue(abs(root - 1.0) < 0.1)
        self.assertTrue(info["method"] == MONTE_CARLO)


    def test_contracting_constant_has_no_root (self):
        with self.assertRaises(NoRoot):
            solve_alpha(hiddenrv.constant(a=(0.9, 0.9), b=(1.0, 1.0)), 1)


    def test_expanding_constant_violates_drift (self):
        with self.assertRaises(NegativeDriftViolated):
            solve_alpha(hiddenrv.constant(a=(1.1, 0.9), b=(1.0, 1.0)), 1)


class TestPhi (unittest.TestCase):

    def test_symmetric_level_point (self):
        ev = PhiEvaluator(symmetric_log_gaussian(0.5), (1.0, 1.0))
        value, stderr = phi(ev, (2.0 / 3.0, 2.0 / 3.0))
        self.assertAlmostEqual(value, 1.0, places=12)
        self.assertTrue(stderr == 0.0)


    def test_gradient_at_axis_point (self):
        ev = PhiEvaluator(symmetric_log_gaussian(0.6), (1.0, 1.0))
        grad = grad_phi(ev, (1.0, 0.0))
        self.assertAlmostEqual(grad[0], 0.5, places=12)
        self.assertAlmostEqual(grad[1], 0.1, places=12)


    def test_convexity (self):
        ev = PhiEvaluator(symmetric_log_gaussian(0.5), (1.0, 1.0))
        rng = np.random.default_rng(2024)

        for _ in range(100):
            x, y = rng.uniform(-1.0, 2.0, size=(2, 2))
            mid = phi(ev, 0.5 * (x + y))[0]
            self.assertTrue(mid <= 0.5 * (phi(ev, x)[0] + phi(ev, y)[0]) + 1e-12)


    def test_tilted_moments_on_level_set (self):
        ev = PhiEvaluator(symmetric_log_gaussian(0.5), (1.0, 1.0))
        mean, cov = ev.tilted_moments((2.0 / 3.0, 2.0 / 3.0))
        self.assertTrue(np.allclose(mean, [0.5, 0.5], atol=1e-12))
        self.assertTrue(np.allclose(cov, [[1.0, 0.5], [0.5, 1.0]], atol=1e-10))


    def test_quadrature_matches_closed_form (self):
        spec = symmetric_log_gaussian(0.3)
        closed = PhiEvaluator(spec, (1.0, 1.0))
        quad = PhiEvaluator(spec, (1.0, 1.0), method="quadrature")

        for xi in ((0.2, 0.7), (0.5, 0.5), (1.0, 0.0)):
            a, ga, ha = closed.moments(xi)
            b, gb, hb = quad.moments(xi)
            self.assertAlmostEqual(a, b, places=10)
            self.assertTrue(np.allclose(ga, gb, atol=1e-9))
            self.assertTrue(np.allclose(ha, hb, atol=1e-8))


    def test_monte_carlo_matches_closed_form (self):
        spec = symmetric_log_gaussian(0.5, seed=3)
        closed = PhiEvaluator(spec, (1.0, 1.0))
        mc = PhiEvaluator(spec, (1.0, 1.0), method=MONTE_CARLO, n=200_000)
        value, stderr = mc.phi((0.3, 0.3))
        self.assertTrue(abs(value - closed.phi((0.3, 0.3))[0]) < 5.0 * stderr)
        self.assertFalse(mc.deterministic)

        with self.assertRaises(Unsupported):
            mc.moments((0.3, 0.3))


    def test_monte_carlo_gradient (self):
        spec = symmetric_log_gaussian(0.5, seed=3)
        closed = PhiEvaluator(spec, (1.0, 1.0))
        mc = PhiEvaluator(spec, (1.0, 1.0), method=MONTE_CARLO, n=200_000)

        for xi in ((0.3, 0.3), (0.2, 0.5), (0.6, 0.1)):
            grad, stderr = mc.grad(xi)
            self.assertTrue(np.all(stderr > 0.0))
            self.assertTrue(np.all(np.abs(grad - grad_phi(closed, xi)) < 5.0 * stderr))
            self.assertTrue(np.array_equal(grad_phi(mc, xi), grad))


    def test_bekk_diag_quadrature_matches_monte_carlo (self):
        spec = hiddenrv.bekk_diag(lags=BEKK_LAGS, seed=2)
        quad = PhiEvaluator(spec, (1.0, 1.0))
        mc = PhiEvaluator(spec, (1.0, 1.0), method=MONTE_CARLO, n=200_000)
        self.assertTrue(quad.method == "quadrature")

        for xi in ((0.5, 0.5), (0.3, 0.8), (1.0, 0.0)):
            value, stderr = mc.phi(xi)
            self.assertTrue(abs(quad.phi(xi)[0] - value) < 5.0 * stderr)

            grad, grad_stderr = mc.grad(xi)
            self.assertTrue(np.all(np.abs(quad.grad(xi)[0] - grad) < 5.0 * grad_stderr))


    def test_closed_form_needs_family_support (self):
        spec = hiddenrv.ccc_garch(a=(1.0, 1.0), b=(0.5, 0.5), c=(0.5, 0.5), eta=0.5)

        with self.assertRaises(Unsupported):
            PhiEvaluator(spec, (1.0, 1.0), method="closed_form")


    def test_psi_at_origin (self):
        ev = PhiEvaluator(symmetric_log_gaussian(0.5), (1.0, 1.0), n=1_000)
        estimate = psi(ev, (0.0, 0.0))
        self.assertAlmostEqual(estimate.value, 4.0, places=12)
        self.assertTrue(estimate.stable)


    def test_psi_product_form (self):
        # B is constant at (1, 1), so every B factor is one and ψ splits into marginals of A plus φ
        spec = hiddenrv.ccc_garch(a=(1.0, 1.0), b=(0.5, 0.5), c=(0.5, 0.5), eta=0.5, seed=4)
        ev = PhiEvaluator(spec, solve_tail_indices(spec), n=200_000)
        estimate = psi(ev, (0.5, 0.5))
        expected = phi(ev, (0.5, 0.0))[0] + phi(ev, (0.0, 0.5))[0] + 1.0 + phi(ev, (0.5, 0.5))[0]

        self.assertAlmostEqual(estimate.terms["b1_b2"], 1.0, places=12)
        self.assertTrue(abs(estimate.value - expected) < 5.0 * estimate.stderr)


class TestRunningMoment (unittest.TestCase):

    def test_constant_terms_are_stable (self):
        est, stderr, stable = running_moment(np.full(1_000, 3.0))
        self.assertTrue(est == 3.0 and stderr == 0.0 and stable)


    def test_one_dominant_term_is_unstable (self):
        values = np.ones(1_000)
        values[-1] = 1e6
        self.assertFalse(running_moment(values)[2])


class TestAssumptions (unittest.TestCase):

    IDS = {"A1", "A2", "A3", "A4a", "A4b", "A4c", "A5", "A5b", "A6", "support"}

    def test_every_id_once (self):
        report = check_assumptions(symmetric_log_gaussian(0.6, seed=1), n=20_000)
        ids = [entry["id"] for entry in report.serialize()]
        self.assertTrue(sorted(ids) == sorted(self.IDS))
        self.assertTrue(report.status("A1") == "pass")
        self.assertTrue(report.status("A3") == "pass")
        self.assertTrue(report.status("A4c") == "pass")
        self.assertTrue(report.status("A6") == "pass")
        self.assertTrue(report.status("support") == "pass")


    def test_a6_fails_for_weak_correlation (self):
        report = check_assumptions(symmetric_log_gaussian(0.2, seed=1), n=20_000)
        self.assertTrue(report.status("A6") == "fail")


    def test_no_tail_index (self):
        report = check_assumptions(hiddenrv.constant(a=(0.9, 0.9), b=(1.0, 1.0)), n=1_000)
        self.assertTrue(report.status("A1") == "fail")
        self.assertTrue(all(report.status(i) == "unverifiable" for i in self.IDS - {"A1"}))


    def test_deterministic_model_has_fixed_point (self):
        spec = hiddenrv.constant(a=(0.5, 0.5), b=(1.0, 2.0))
        report = check_assumptions(spec, unit_indices(), n=1_000)
        entry = report.entries["A3"]
        self.assertTrue(entry["status"] == "fail")
        self.assertTrue(np.allclose(entry["evidence"]["fixed_point"], [2.0, 4.0]))
        self.assertTrue(report.status("A4b") == "fail")


class TestLevelSet (unittest.TestCase):

    def test_trace_geometry (self):
        ev = PhiEvaluator(symmetric_log_gaussian(0.6), (1.0, 1.0))
        trace = trace_level_set(ev)
        first, last = trace.endpoints
        self.assertTrue(np.abs(first - [1.0, 0.0]).max() < 1e-6)
        self.assertTrue(np.abs(last - [0.0, 1.0]).max() < 1e-6)
        self.assertTrue((trace.h[1:-1] > 1.0 + 1e-9).all())
        self.assertTrue(trace.residuals.max() < 1e-8)

        chords = np.linalg.norm(np.diff(trace.points, axis=0), axis=1)
        self.assertTrue(chords.max() <= 1.5 * trace.step)
        self.assertTrue(list(trace.to_frame().columns) == ["xi1", "xi2", "phi_residual", "h"])


    def test_segment_lies_inside (self):
        ev = PhiEvaluator(symmetric_log_gaussian(0.6), (1.0, 1.0))

        for s in np.linspace(0.1, 0.9, 9):
            self.assertTrue(phi(ev, (s, 1.0 - s))[0] < 1.0 - 1e-9)


    def test_open_arc_without_a6 (self):
        ev = PhiEvaluator(symmetric_log_gaussian(0.2), (1.0, 1.0))

        with self.assertRaises(OpenArc):
            trace_level_set(ev)


    def test_symmetric_critical_point (self):
        ev = PhiEvaluator(symmetric_log_gaussian(0.5), (1.0, 1.0))
        point = find_xi_star(ev)
        self.assertTrue(np.abs(point.xi_star - 2.0 / 3.0).max() < 1e-6)
        self.assertAlmostEqual(point.h, 4.0 / 3.0, places=6)
        self.assertTrue(point.is_certified)
        self.assertTrue(point.serialize()["method"] == "newton")


    def test_bekk_diag_critical_point (self):
        spec = hiddenrv.bekk_diag(lags=BEKK_LAGS)
        ev = PhiEvaluator(spec, solve_tail_indices(spec))
        point = find_xi_star(ev)
        xi = point.xi_star
        grad = grad_phi(ev, xi)

        self.assertTrue(point.is_certified)
        self.assertTrue(np.all((xi > 0.0) & (xi < 1.0)))
        self.assertTrue(abs(phi(ev, xi)[0] - 1.0) < 1e-8)
        self.assertTrue(abs(grad[0] - grad[1]) < 1e-4 * np.linalg.norm(grad))
        self.assertAlmostEqual(point.h, xi.sum(), places=9)


    def test_critical_point_needs_deterministic_backend (self):
        ev = PhiEvaluator(symmetric_log_gaussian(0.5), (1.0, 1.0), method=MONTE_CARLO, n=1_000)

        with self.assertRaises(Unsupported):
            find_xi_star(ev)


    def test_ccc_garch_critical_point_on_grid (self):
        spec = hiddenrv.ccc_garch(a=(1.0, 1.0), b=(0.5, 0.5), c=(0.5, 0.5), eta=0.5)
        ev = PhiEvaluator(spec, solve_tail_indices(spec))
        point = find_xi_star(ev)

        # brute force: h maximized over rays through the level set
        best = 0.0

        for angle in np.linspace(0.05, np.pi / 2 - 0.05, 100):
            u = np.array([np.cos(angle), np.sin(angle)])
            lo, hi = 0.3, 2.0

            for _ in range(40):
                mid = 0.5 * (lo + hi)
                lo, hi = (mid, hi) if phi(ev, mid * u)[0] < 1.0 else (lo, mid)

            best = max(best, (lo * u).sum())

        self.assertTrue(point.is_certified)
        self.assertTrue(abs(point.h - best) < 1e-3)


class TestFacade (unittest.TestCase):

    def test_missing_config (self):
        with self.assertRaises(ConfigError):
            HiddenRVAPI(config_file="does_not_exist.cfg")


    def test_tail_indices_and_critical_point (self):
        with tempfile.TemporaryDirectory() as folder:
            hrv = HiddenRVAPI(config_file=write_config(folder, LOG_GAUSSIAN_CFG))

            response = hrv.tail_indices()
            self.assertTrue(response.message is None)
            self.assertTrue(np.allclose(response.meta.alpha, [1.0, 1.0]))
            self.assertTrue(response.timing >= 0.0)

            response = hrv.critical_point()
            self.assertTrue(response.exit_code == 0)
            self.assertTrue(np.allclose(response.meta.xi_star, [2.0 / 3.0, 2.0 / 3.0], atol=1e-6))
            self.assertTrue(abs(response.serialize()["meta"]["h"] - 4.0 / 3.0) < 1e-9)


    def test_errors_become_messages (self):
        with tempfile.TemporaryDirectory() as folder:
            hrv = HiddenRVAPI(config_file=write_config(folder, CONSTANT_CFG))
            response = hrv.tail_indices()
            self.assertTrue(response.meta is None)
            self.assertTrue(response.message.startswith("ERROR"))
            self.assertTrue(response.exit_code == 2)
            self.assertTrue(isinstance(response.error, NoRoot))


    def test_seed_override (self):
        with tempfile.TemporaryDirectory() as folder:
            hrv = HiddenRVAPI(config_file=write_config(folder, LOG_GAUSSIAN_CFG), seed=99)
            self.assertTrue(hrv.seed == 99)
            self.assertTrue(hrv.simulation_config(10).seed == 99)


    def test_unknown_sections_and_keys (self):
        config = configparser.ConfigParser()
        config.optionxform = str
        config.read_string(LOG_GAUSSIAN_CFG + "\n[plots]\ncolour = red\n")

        with self.assertRaises(ConfigError):
            load_settings(config)

        config = configparser.ConfigParser()
        config.optionxform = str
        config.read_string(LOG_GAUSSIAN_CFG + "\n[simulation]\nburnin = 10\n")

        with self.assertRaises(ConfigError):
            load_settings(config)


    def test_defaults_fill_missing_sections (self):
        config = configparser.ConfigParser()
        config.optionxform = str
        config.read_string(LOG_GAUSSIAN_CFG)
        settings = load_settings(config)
        self.assertTrue(settings["simulation"]["burn_in"] == 10_000)
        self.assertTrue(settings["model"]["C"] == [[1.0, 0.5], [0.5, 1.0]])
        self.assertTrue(settings["model"]["family"] == "log_gaussian")


    def test_parse_t_grid (self):
        self.assertTrue(np.allclose(parse_t_grid("10:1000:3,log"), [10.0, 100.0, 1000.0]))
        self.assertTrue(np.allclose(parse_t_grid("1:3:3"), [1.0, 2.0, 3.0]))
        self.assertTrue(np.allclose(parse_t_grid([5, 6]), [5.0, 6.0]))

        for bad in ("abc", "1:2", "0:10:3,log", "1:10:3,cubic"):
            with self.assertRaises(ConfigError):
                parse_t_grid(bad)


if __name__ == "__main__":
    unittest.main()
