#!/usr/bin/env python
# encoding: utf-8

from stochrec.hiddenrv.errors import ConfigError, GroupMismatch, NonTransient
from stochrec.hiddenrv.renewal import (
    IncrementLaw, Rectangle, carlsson_bound_check, group_renewal_estimate,
    renewal_measure_estimate, stam_constant,
    )
import math
import numpy as np
import unittest


UNIT = Rectangle(lo=(0.0, 0.0), hi=(1.0, 1.0))


class TestLaws (unittest.TestCase):

    def test_bad_laws (self):
        with self.assertRaises(ConfigError):
            IncrementLaw(mean=(1.0, 1.0, 1.0))

        with self.assertRaises(ConfigError):
            IncrementLaw(mean=(1.0, 1.0), cov=((1.0, 2.0), (2.0, 1.0)))

        with self.assertRaises(ConfigError):
            IncrementLaw(mean=(1.0, 1.0), flip_prob=1.5)

        with self.assertRaises(ConfigError):
            IncrementLaw(mean=(1.0, 1.0), group=3)


    def test_bad_rectangle (self):
        with self.assertRaises(ConfigError):
            Rectangle(lo=(1.0, 0.0), hi=(0.0, 1.0))

        self.assertTrue(Rectangle(lo=(0, 0), hi=(2, 3)).area == 6.0)


    def test_projected_sigma (self):
        law = IncrementLaw(mean=(1.0, 0.0), cov=((4.0, 0.0), (0.0, 1.0)))
        self.assertAlmostEqual(law.projected_sigma(), 2.0)


    def test_stam_constant (self):
        law = IncrementLaw(mean=(1.0, 1.0))
        expected = (2.0 * math.pi) ** -0.5 * 2.0 ** -0.25
        self.assertAlmostEqual(stam_constant(law, UNIT), expected)


class TestRenewal (unittest.TestCase):

    def test_zero_drift (self):
        with self.assertRaises(NonTransient):
            renewal_measure_estimate(IncrementLaw(mean=(0.0, 0.0)), UNIT, [10.0], 100, seed=1)


    def test_bad_grid (self):
        with self.assertRaises(ConfigError):
            renewal_measure_estimate(IncrementLaw(mean=(1.0, 1.0)), UNIT, [10.0, 5.0], 100, seed=1)


    def test_along_beats_against (self):
        law = IncrementLaw(mean=(0.5, 0.5))
        along = renewal_measure_estimate(law, UNIT, [10.0, 20.0], 500, seed=2)
        against = renewal_measure_estimate(law, UNIT, [10.0, 20.0], 500, seed=2, against=True)

        self.assertTrue(np.all(along.values > against.values))
        self.assertTrue(along.meta["stam_uncertified"] > 0.0)


    def test_scaling_is_stable (self):
        law = IncrementLaw(mean=(1.0, 1.0))
        est = renewal_measure_estimate(law, Rectangle(lo=(-1.0, -1.0), hi=(1.0, 1.0)), [10.0, 100.0], 5_000, seed=3, workers=2)
        ratio = est.stability_ratio()

        self.assertTrue(0.6 <= ratio <= 1.4)
        self.assertTrue(list(est.to_frame().columns) == ["t", "value", "stderr", "k"])


    def test_measure_follows_area (self):
        law = IncrementLaw(mean=(1.0, 1.0))
        unit = renewal_measure_estimate(law, UNIT, [50.0], 20_000, seed=8)
        wide = renewal_measure_estimate(law, Rectangle(lo=(0.0, 0.0), hi=(2.0, 1.0)), [50.0], 20_000, seed=8)
        moved = renewal_measure_estimate(law, Rectangle(lo=(1.0, 1.0), hi=(2.0, 2.0)), [50.0], 20_000, seed=8)

        self.assertTrue(unit.values[0] > 0.0)
        self.assertTrue(abs(wide.values[0] - 2.0 * unit.values[0]) < 4.0 * math.hypot(wide.stderr[0], 2.0 * unit.stderr[0]))
        self.assertTrue(abs(moved.values[0] - unit.values[0]) < 4.0 * math.hypot(moved.stderr[0], unit.stderr[0]))


    def test_worker_count_does_not_matter (self):
        law = IncrementLaw(mean=(1.0, 0.5))
        one = renewal_measure_estimate(law, UNIT, [5.0], 300, seed=4, workers=1)
        two = renewal_measure_estimate(law, UNIT, [5.0], 300, seed=4, workers=2)
        self.assertTrue(np.array_equal(one.visits, two.visits))


class TestGroupSlices (unittest.TestCase):

    def test_declared_group_not_generated (self):
        with self.assertRaises(GroupMismatch):
            group_renewal_estimate(IncrementLaw(mean=(1.0, 1.0), flip_prob=0.0, group=2), UNIT, [10.0], 100, seed=1)


    def test_slices_add_up (self):
        law = IncrementLaw(mean=(1.0, 1.0), flip_prob=0.5, group=2)
        est = group_renewal_estimate(law, Rectangle(lo=(-1.0, -1.0), hi=(1.0, 1.0)), [10.0, 40.0], 2_000, seed=5)

        self.assertTrue(sorted(est.group_slices) == [-1, 1])
        self.assertTrue(np.array_equal(est.group_slices[1]["visits"] + est.group_slices[-1]["visits"], est.visits))
        self.assertTrue(np.allclose(est.group_slices[1]["values"] + est.group_slices[-1]["values"], est.values))

        # fair flips leave the two signs equally likely along the walk
        gap = abs(est.group_slices[1]["values"][-1] - est.group_slices[-1]["values"][-1])
        self.assertTrue(gap < 5.0 * math.hypot(est.group_slices[1]["stderr"][-1], est.group_slices[-1]["stderr"][-1]))


    def test_trivial_group (self):
        law = IncrementLaw(mean=(1.0, 1.0))
        est = group_renewal_estimate(law, UNIT, [10.0], 200, seed=6)

        self.assertTrue(list(est.group_slices) == [1])
        self.assertTrue(np.array_equal(est.group_slices[1]["visits"], est.visits))
        self.assertTrue(est.meta["group"] == [[1]])


class TestCarlsson (unittest.TestCase):

    def test_off_axis_table (self):
        law = IncrementLaw(mean=(1.0, 1.0))
        table = carlsson_bound_check(law, [-3.0, 0.0, 3.0], [10.0, 40.0], 1_000, seed=7)

        self.assertTrue(table.values.shape == (3, 2))
        self.assertTrue(table.on_axis > 0.0)
        self.assertTrue(table.bounded)
        self.assertTrue(len(table.to_frame()) == 6)


if __name__ == "__main__":
    unittest.main()
