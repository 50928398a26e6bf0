#!/usr/bin/env python
# encoding: utf-8

"""
empirical renewal measures of two-dimensional random walks with positive
drift, optionally carrying a sign component in a finite group K
"""

from dataclasses import dataclass, field
import math
import numpy as np
import pandas as pd

from .errors import ConfigError, GroupMismatch, NonTransient
from .mc import PATHS_PER_STREAM, _split, map_streams, sign_group, stream_seeds


SAFETY_SIGMAS = 10.0
PILOT_DRAWS = 10_000
SIGN_DRAWS = 1_000
MAX_STEPS = 1_000_000


@dataclass(frozen=True)
class IncrementLaw:
    """
    Gaussian increments N(mean, cov) with a sign component equal to -1
    with probability `flip_prob`; `group` is the declared order of K (1 or 2)
    """
    mean: tuple
    cov: tuple = ((1.0, 0.0), (0.0, 1.0))
    flip_prob: float = 0.0
    group: int = 1

    def __post_init__ (self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)

        if mean.shape != (2,) or cov.shape != (2, 2):
            raise ConfigError("increment law needs a 2-vector mean and a 2x2 covariance")
        if not np.allclose(cov, cov.T) or np.linalg.eigvalsh(cov).min() <= 0.0:
            raise ConfigError("increment covariance must be symmetric positive definite")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ConfigError("`flip_prob` must lie in [0, 1]")
        if self.group not in (1, 2):
            raise ConfigError("`group` must be 1 (trivial) or 2 (Z2)")

        object.__setattr__(self, "mean", tuple(mean.tolist()))
        object.__setattr__(self, "cov", tuple(map(tuple, cov.tolist())))


    @property
    def declared_group (self):
        return ((-1,), (1,)) if self.group == 2 else ((1,),)


    def sample (self, rng, size):
        """
        increments (size, 2) and signs (size,)
        """
        chol = np.linalg.cholesky(np.asarray(self.cov))
        steps = np.asarray(self.mean) + rng.standard_normal((size, 2)) @ chol.T
        signs = np.where(rng.random(size) < self.flip_prob, -1, 1).astype(np.int8)
        return steps, signs


    def projected_sigma (self):
        """
        standard deviation of an increment along the drift direction
        """
        unit = np.asarray(self.mean) / np.linalg.norm(self.mean)
        return float(np.sqrt(unit @ np.asarray(self.cov) @ unit))


@dataclass(frozen=True)
class Rectangle:
    lo: tuple
    hi: tuple

    def __post_init__ (self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)

        if len(lo) != 2 or len(hi) != 2 or lo[0] >= hi[0] or lo[1] >= hi[1]:
            raise ConfigError(f"bad rectangle {lo} .. {hi}")

        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)


    @property
    def area (self):
        return (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])


@dataclass
class RenewalEstimate:
    """
    t^{1/2} Û(tρ + region) per t; `visits` are the raw visit totals over
    all paths, and `group_slices` split them by the sign component
    """
    region: Rectangle
    t_grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    visits: np.ndarray
    n_paths: int
    group_slices: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def stability_ratio (self):
        return float(self.values[-1] / self.values[0]) if self.values[0] > 0.0 else float("nan")


    def to_frame (self):
        rows = [{"t": t, "value": v, "stderr": s, "k": "all"} for t, v, s in zip(self.t_grid, self.values, self.stderr)]

        for k, piece in sorted(self.group_slices.items()):
            rows.extend({"t": t, "value": v, "stderr": s, "k": k} for t, v, s in zip(self.t_grid, piece["values"], piece["stderr"]))

        return pd.DataFrame(rows)


    def to_csv (self, path):
        self.to_frame().to_csv(path, index=False, float_format="%.12g")


######################################################################
## visit counting

def _visit_worker (task):
    """
    per-path visit counts to each rectangle, split by the running sign
    """
    law, seed_seq, n_paths, lo, hi, far, sigma = task
    rng = np.random.default_rng(seed_seq)
    unit = np.asarray(law.mean) / np.linalg.norm(law.mean)
    s = np.zeros((n_paths, 2))
    sign = np.ones(n_paths, dtype=np.int8)
    counts = np.zeros((n_paths, lo.shape[0], 2), dtype=np.int64)
    active = np.ones(n_paths, dtype=bool)
    n = 0

    while active.any() and n < MAX_STEPS:
        n += 1
        idx = np.flatnonzero(active)
        steps, signs = law.sample(rng, idx.size)
        s[idx] += steps
        sign[idx] *= signs

        pos = s[idx][:, None, :]
        inside = ((pos > lo[None]) & (pos < hi[None])).all(axis=2)
        slot = (sign[idx] < 0).astype(int)
        counts[idx, :, 0] += inside * (slot == 0)[:, None]
        counts[idx, :, 1] += inside * (slot == 1)[:, None]

        passed = (s[idx] - far) @ unit > SAFETY_SIGMAS * sigma * math.sqrt(n)
        active[idx[passed]] = False

    return counts


def _check_transient (law, seed):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5eed]))
    steps, signs = law.sample(rng, PILOT_DRAWS)
    mean = steps.mean(axis=0)
    stderr = steps.std(axis=0, ddof=1) / math.sqrt(PILOT_DRAWS)

    if (np.abs(mean) < 3.0 * stderr).all() or np.linalg.norm(law.mean) == 0.0:
        raise NonTransient(f"drift estimate {mean.tolist()} is zero at 3 sigma", drift=mean.tolist())

    return signs


def _count_visits (law, rects, n_paths, seed, workers):
    """
    (n_paths, len(rects), 2) visit counts for rectangles in absolute
    coordinates
    """
    lo = np.array([r.lo for r in rects])
    hi = np.array([r.hi for r in rects])
    unit = np.asarray(law.mean) / np.linalg.norm(law.mean)
    corners = np.concatenate([lo, hi, np.column_stack([lo[:, 0], hi[:, 1]]), np.column_stack([hi[:, 0], lo[:, 1]])])
    far = corners[np.argmax(corners @ unit)]

    sizes = _split(n_paths, PATHS_PER_STREAM)
    seeds = stream_seeds(seed, len(sizes))
    tasks = [(law, seeds[i], size, lo, hi, far, law.projected_sigma()) for i, size in enumerate(sizes)]
    return np.concatenate(map_streams(_visit_worker, tasks, workers))


def _placed (region, t, law, sign=1.0, offset=(0.0, 0.0)):
    shift = sign * t * np.asarray(law.mean) + np.asarray(offset)
    return Rectangle(lo=tuple(np.asarray(region.lo) + shift), hi=tuple(np.asarray(region.hi) + shift))


def _scaled (counts, t):
    n = counts.shape[0]
    root = math.sqrt(t)
    return root * counts.mean(), root * counts.std(ddof=1) / math.sqrt(n) if n > 1 else float("nan")


def stam_constant (law, region):
    """
    (2π)^{-1/2} (det B)^{-1/2} |ρ|^{-1/2} λ(region) with B taken as the
    increment covariance; not certified
    """
    det = np.linalg.det(np.asarray(law.cov))
    return (2.0 * math.pi) ** -0.5 * det ** -0.5 * np.linalg.norm(law.mean) ** -0.5 * region.area


def _check_grid (t_grid):
    t = np.asarray(t_grid, dtype=float).reshape(-1)

    if t.size == 0 or (t <= 0.0).any() or (np.diff(t) <= 0.0).any():
        raise ConfigError(f"t grid must be positive and strictly increasing: {t.tolist()}")

    return t


def renewal_measure_estimate (law, region, t_grid, n_paths, seed, against=False, workers=1, logger=None):
    """
    estimate t^{1/2} U(tρ + region) with U(C) = sum_n P(S_n ∈ C), counting
    visits of each path until it has passed the farthest target by a
    safety margin of 10 σ √n along the drift; `against` places the
    regions at -tρ instead

    :returns: RenewalEstimate
    """
    t = _check_grid(t_grid)
    _check_transient(law, seed)
    rects = [_placed(region, level, law, -1.0 if against else 1.0) for level in t]
    counts = _count_visits(law, rects, n_paths, seed, workers)
    total = counts.sum(axis=2)

    values, stderr = zip(*(_scaled(total[:, j], level) for j, level in enumerate(t)))
    meta = {"stam_uncertified": stam_constant(law, region)}

    if logger:
        logger.info("Stam constant (uncertified, B = increment covariance): %.6g", meta["stam_uncertified"])

    return RenewalEstimate(
        region=region, t_grid=t, values=np.array(values), stderr=np.array(stderr),
        visits=total.sum(axis=0), n_paths=n_paths, meta=meta,
        )


@dataclass
class CarlssonTable:
    offsets: np.ndarray
    t_grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    on_axis: float
    maximum: float

    @property
    def bounded (self):
        return bool(np.isfinite(self.maximum) and self.maximum <= 3.0 * self.on_axis)


    def to_frame (self):
        rows = []

        for i, x in enumerate(self.offsets):
            for j, t in enumerate(self.t_grid):
                rows.append({"offset": x, "t": t, "value": self.values[i, j], "stderr": self.stderr[i, j]})

        return pd.DataFrame(rows)


def carlsson_bound_check (law, offsets, t_grid, n_paths, seed, region=None, workers=1, logger=None):
    """
    t^{1/2} Û(tρ + x + F0) for offsets x orthogonal to the drift, given
    as signed distances along the unit normal; the maximum over the
    table is compared with three times the largest on-axis value

    :returns: CarlssonTable
    """
    t = _check_grid(t_grid)
    region = region or Rectangle(lo=(0.0, 0.0), hi=(1.0, 1.0))
    offsets = np.asarray(offsets, dtype=float).reshape(-1)
    _check_transient(law, seed)

    unit = np.asarray(law.mean) / np.linalg.norm(law.mean)
    normal = np.array([-unit[1], unit[0]])
    rects = [_placed(region, level, law, offset=x * normal) for x in offsets for level in t]
    counts = _count_visits(law, rects, n_paths, seed, workers).sum(axis=2)

    values = np.zeros((offsets.size, t.size))
    stderr = np.zeros((offsets.size, t.size))

    for i in range(offsets.size):
        for j, level in enumerate(t):
            values[i, j], stderr[i, j] = _scaled(counts[:, i * t.size + j], level)

    axis = np.flatnonzero(offsets == 0.0)
    on_axis = float(values[axis].max()) if axis.size else float(values[np.argmin(np.abs(offsets))].max())
    table = CarlssonTable(offsets=offsets, t_grid=t, values=values, stderr=stderr, on_axis=on_axis, maximum=float(values.max()))

    if logger:
        logger.info("renewal table max %.4g vs 3x on-axis %.4g", table.maximum, 3.0 * on_axis)

    return table


def group_renewal_estimate (law, region, t_grid, n_paths, seed, workers=1, logger=None):
    """
    visit counts to tρ + region split by the value k of the running sign
    component; the slices equalize as t grows

    :returns: RenewalEstimate with `group_slices` keyed by k
    """
    t = _check_grid(t_grid)
    signs = _check_transient(law, seed)
    observed = sign_group(signs[:SIGN_DRAWS, None])

    if len(observed) < len(law.declared_group):
        raise GroupMismatch(f"observed signs generate {observed}, declared {law.declared_group}", observed=list(observed))

    rects = [_placed(region, level, law) for level in t]
    counts = _count_visits(law, rects, n_paths, seed, workers)
    total = counts.sum(axis=2)
    values, stderr = zip(*(_scaled(total[:, j], level) for j, level in enumerate(t)))

    slices = {}

    for slot, k in ((0, 1), (1, -1)):
        if (k,) not in law.declared_group:
            continue

        part = counts[:, :, slot]
        vals, errs = zip(*(_scaled(part[:, j], level) for j, level in enumerate(t)))
        slices[k] = {"values": np.array(vals), "stderr": np.array(errs), "visits": part.sum(axis=0)}

    if logger:
        logger.debug("group slices at t=%g: %s", t[-1], {k: float(v["values"][-1]) for k, v in slices.items()})

    return RenewalEstimate(
        region=region, t_grid=t, values=np.array(values), stderr=np.array(stderr),
        visits=total.sum(axis=0), n_paths=n_paths, group_slices=slices,
        meta={"stam_uncertified": stam_constant(law, region), "group": [list(g) for g in observed]},
        )
