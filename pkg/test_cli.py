#!/usr/bin/env python
# encoding: utf-8

from stochrec.hiddenrv.cli import main
import hashlib
import json
import numpy as np
import os
import pandas as pd
import tempfile
import unittest


LOG_GAUSSIAN_CFG = """
[model]
family = log_gaussian
m = [-0.5, -0.5]
C = [[1.0, 0.5], [0.5, 1.0]]
seed = 11

[simulation]
burn_in = 50
n_chains = 8
n_samples = 400

[exceedance]
t = 20
n_paths = 2000

[renewal]
mean = [1.0, 1.0]
t_grid = [5, 10]
n_paths = 200
offsets = [0.0, 1.0]
"""

CONSTANT_CFG = """
[model]
family = constant
a = [0.9, 0.9]
b = [1.0, 1.0]

[simulation]
burn_in = 400
n_chains = 4
"""

ZERO_DRIFT_CFG = LOG_GAUSSIAN_CFG.replace("mean = [1.0, 1.0]", "mean = [0.0, 0.0]")


class TestCommands (unittest.TestCase):

    def setUp (self):
        self.folder = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.folder.name, "out")


    def tearDown (self):
        self.folder.cleanup()


    def config (self, text, name="sre.cfg"):
        path = os.path.join(self.folder.name, name)

        with open(path, "w") as f:
            f.write(text)

        return path


    def run_cli (self, *argv, text=LOG_GAUSSIAN_CFG, out=None):
        return main([*argv, "--config", self.config(text), "--out", out or self.out, "--workers", "1"])


    def load (self, name, out=None):
        with open(os.path.join(out or self.out, name)) as f:
            return json.load(f)


    def test_analyze (self):
        self.assertTrue(self.run_cli("analyze") == 0)

        report = self.load("report.json")
        self.assertTrue(report["xi_star"] == [0.666667, 0.666667])
        self.assertTrue(report["h"] == 1.333333)
        self.assertTrue(report["seed"] == 11)
        self.assertTrue(report["error"] is None)

        manifest = self.load("manifest.json")
        self.assertTrue(manifest["command"] == "analyze")
        self.assertTrue(manifest["timings"]["exit_code"] == 0)

        for entry in manifest["outputs"]:
            with open(os.path.join(self.out, entry["path"]), "rb") as f:
                self.assertTrue(hashlib.sha256(f.read()).hexdigest() == entry["sha256"])


    def test_analyze_without_tail_index (self):
        self.assertTrue(self.run_cli("analyze", text=CONSTANT_CFG) == 2)
        self.assertTrue(self.load("manifest.json")["timings"]["exit_code"] == 2)


    def test_check_assumptions (self):
        self.assertTrue(self.run_cli("check-assumptions") == 0)
        self.assertTrue("assumptions" in self.load("assumptions.json"))


    def test_simulate_nothing (self):
        self.assertTrue(self.run_cli("simulate", "-n", "0") == 0)

        with open(os.path.join(self.out, "samples.csv")) as f:
            self.assertTrue(f.read().strip() == "x1,x2,s,omega1,omega2")


    def test_negative_count (self):
        self.assertTrue(self.run_cli("simulate", "-n", "-5") == 3)


    def test_simulate_is_reproducible (self):
        one = os.path.join(self.folder.name, "one")
        two = os.path.join(self.folder.name, "two")
        self.assertTrue(main(["simulate", "-n", "200", "--config", self.config(LOG_GAUSSIAN_CFG), "--out", one, "--workers", "1"]) == 0)
        self.assertTrue(main(["simulate", "-n", "200", "--config", self.config(LOG_GAUSSIAN_CFG), "--out", two, "--workers", "2"]) == 0)

        for name in ("samples.csv", "samples.npz"):
            with open(os.path.join(one, name), "rb") as f, open(os.path.join(two, name), "rb") as g:
                self.assertTrue(f.read() == g.read())


    def test_simulate_constant_model (self):
        self.assertTrue(self.run_cli("simulate", "-n", "50", text=CONSTANT_CFG) == 0)
        frame = pd.read_csv(os.path.join(self.out, "samples.csv"))

        self.assertTrue(len(frame) == 50)
        self.assertTrue(np.allclose(frame[["x1", "x2"]].values, 10.0))


    def test_decreasing_grid (self):
        self.assertTrue(self.run_cli("tail-scan", "--t-grid", "10:5:3") == 3)


    def test_marginal_scan (self):
        self.assertTrue(self.run_cli("tail-scan", "--t-grid", "2:8:3") == 0)

        summary = self.load("scan.json")
        self.assertTrue(summary["kind"] == "marginal1")
        self.assertTrue(os.path.isfile(os.path.join(self.out, "spectral.csv")))
        self.assertTrue(len(pd.read_csv(os.path.join(self.out, "scan.csv"))) == 3)


    def test_joint_scan_needs_xi (self):
        self.assertTrue(self.run_cli("tail-scan", "--mode", "joint", "--t-grid", "2:8:3") == 3)


    def test_hrv_scan_needs_report (self):
        self.assertTrue(self.run_cli("tail-scan", "--mode", "hrv", "--t-grid", "10:100:3,log") == 3)


    def test_hrv_scan_after_analyze (self):
        self.assertTrue(self.run_cli("analyze") == 0)
        self.assertTrue(self.run_cli("tail-scan", "--mode", "hrv", "--t-grid", "10:100:3,log") == 0)

        summary = self.load("scan.json")
        self.assertTrue(summary["estimator"] == "importance")
        self.assertTrue(summary["log_factor"])
        self.assertTrue(np.allclose(summary["xi"], [0.666667, 0.666667]))


    def test_exceedance (self):
        self.assertTrue(self.run_cli("exceedance") == 0)

        data = self.load("exceedance.json")
        self.assertTrue("exceedance" in data and "walk_box" in data)


    def test_renewal_trivial_group (self):
        self.assertTrue(self.run_cli("renewal-check") == 0)

        data = self.load("renewal.json")
        self.assertTrue(data["group_slices"] == [1])
        self.assertTrue(data["stam_uncertified"] > 0.0)
        self.assertTrue(os.path.isfile(os.path.join(self.out, "carlsson.csv")))


    def test_renewal_zero_drift (self):
        self.assertTrue(self.run_cli("renewal-check", text=ZERO_DRIFT_CFG) == 2)


    def test_unknown_command (self):
        with self.assertRaises(SystemExit) as ctx:
            self.run_cli("bogus")

        self.assertTrue(ctx.exception.code == 3)


    def test_unknown_config_key (self):
        self.assertTrue(self.run_cli("analyze", text=LOG_GAUSSIAN_CFG + "\n[plots]\ncolour = red\n") == 3)


    def test_missing_config (self):
        self.assertTrue(main(["analyze", "--config", os.path.join(self.folder.name, "absent.cfg"), "--out", self.out]) == 3)


if __name__ == "__main__":
    unittest.main()
