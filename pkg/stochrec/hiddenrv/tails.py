#!/usr/bin/env python
# encoding: utf-8

"""
tail scans and hidden regular variation diagnostics over sample
batches: marginal power laws, joint decay and scaling, the angular
(spectral) measure, sign-group invariance and mixed moments
"""

from dataclasses import dataclass, field
from scipy import optimize, stats
import numpy as np
import pandas as pd

from .errors import ConfigError, OutsideDomain
from .mc import ImportanceEngine, SampleBatch


MIN_HITS = 10
MIN_EXCEEDANCES = 500
ANGULAR_BINS = 64
AXES_MARGIN = 0.05
HILL_SHARE = 0.02


def check_t_grid (t_grid):
    """
    positive and strictly increasing, else a configuration error
    """
    t = np.asarray(t_grid, dtype=float).reshape(-1)

    if t.size == 0 or (t <= 0.0).any() or (np.diff(t) <= 0.0).any():
        raise ConfigError(f"t grid must be positive and strictly increasing: {t.tolist()}")

    return t


@dataclass
class ScanResult:
    """
    raw and rescaled exceedance probabilities over a grid of t, with
    scaled = raw * t^exponent * (log t)^(1/2 if log_factor)
    """
    t: np.ndarray
    raw: np.ndarray
    stderr: np.ndarray
    scaled: np.ndarray
    exponent: float
    log_factor: bool = False
    estimator: str = "crude"
    hits: np.ndarray = None
    insufficient_tail: bool = False
    kind: str = "marginal"
    xi: list = None

    @staticmethod
    def scale (t, raw, exponent, log_factor):
        factor = t ** exponent

        if log_factor:
            factor = factor * np.sqrt(np.log(t))

        return raw * factor


    def rescaled (self):
        return self.scale(self.t, self.raw, self.exponent, self.log_factor)


    @property
    def scaled_stderr (self):
        return self.scale(self.t, self.stderr, self.exponent, self.log_factor)


    def descriptor (self):
        return {
            "kind": self.kind,
            "exponent": self.exponent,
            "log_factor": self.log_factor,
            "estimator": self.estimator,
            "xi": self.xi,
            "insufficient_tail": self.insufficient_tail,
            }


    def to_frame (self):
        return pd.DataFrame({
            "t": self.t,
            "raw": self.raw,
            "stderr": self.stderr,
            "scaled": self.scaled,
            "estimator": self.estimator,
            })


    def to_csv (self, path):
        self.to_frame().to_csv(path, index=False, float_format="%.12g")


def fit_slope (scan):
    """
    weighted least-squares slope of log(scaled) against log t, with its
    standard error; grid points without hits are dropped
    """
    keep = scan.raw > 0.0
    x = np.log(scan.t[keep])
    y = np.log(scan.scaled[keep])
    sigma = np.where(scan.stderr[keep] > 0.0, scan.stderr[keep] / scan.raw[keep], 1.0)

    if x.size < 2:
        return float("nan"), float("nan")

    design = np.column_stack([np.ones_like(x), x])
    weights = 1.0 / sigma ** 2
    normal = design.T @ (design * weights[:, None])
    coef = np.linalg.solve(normal, design.T @ (weights * y))
    cov = np.linalg.inv(normal)
    return float(coef[1]), float(np.sqrt(cov[1, 1]))


def _binomial (hits, n):
    p = hits / n if n else np.zeros_like(hits, dtype=float)
    return p, np.sqrt(p * (1.0 - p) / max(n, 1))


######################################################################
## scans

def marginal_tail_scan (batch, component, t_grid):
    """
    P(|X_i| > t^{1/α_i}) over the grid, scaled by t

    :param component: 1 or 2, the block representative.
    :type component: int.
    """
    if component not in (1, 2):
        raise ConfigError("component must be 1 or 2")

    t = check_t_grid(t_grid)
    i = component - 1
    alpha = batch.alpha[i]
    values = np.abs(batch.xs[:, i])
    hits = np.array([(values > level ** (1.0 / alpha)).sum() for level in t])
    raw, stderr = _binomial(hits, len(batch))

    return ScanResult(
        t=t, raw=raw, stderr=stderr, scaled=ScanResult.scale(t, raw, 1.0, False),
        exponent=1.0, estimator="crude", hits=hits,
        insufficient_tail=bool(hits[-1] < MIN_HITS), kind=f"marginal{component}",
        )


def joint_tail_scan (source, alpha, xi, t_grid, use_log_factor=False, engine=None, eps=1.0, logger=None):
    """
    scaled = t^{ξ1+ξ2} (log t)^{1/2 if use_log_factor} P(...); a SampleBatch
    source counts P(|X1| > t^{1/α1}, |X2| > t^{1/α2}) directly, an
    ImportanceEngine estimates the walk exceedance at ξ*; crude scans
    switch to `engine` when the largest t has fewer than 10 hits

    :returns: ScanResult
    """
    t = check_t_grid(t_grid)
    xi = np.asarray(getattr(xi, "xi_star", xi), dtype=float)
    exponent = float(xi.sum())

    if use_log_factor and (t <= 1.0).any():
        raise ConfigError("the log factor needs t > 1")

    if isinstance(source, SampleBatch):
        alpha = source.alpha if alpha is None else np.asarray(getattr(alpha, "alpha", alpha), dtype=float)
        x = np.abs(source.xs[:, :2])
        hits = np.array([((x[:, 0] > level ** (1.0 / alpha[0])) & (x[:, 1] > level ** (1.0 / alpha[1]))).sum() for level in t])
        short = bool(hits[-1] < MIN_HITS)

        if not short or engine is None:
            raw, stderr = _binomial(hits, len(source))
            return ScanResult(
                t=t, raw=raw, stderr=stderr, scaled=ScanResult.scale(t, raw, exponent, use_log_factor),
                exponent=exponent, log_factor=use_log_factor, estimator="crude", hits=hits,
                insufficient_tail=short, kind="joint", xi=xi.tolist(),
                )

        if logger:
            logger.info("only %d joint hits at t=%g, switching to importance sampling", hits[-1], t[-1])

        source = engine

    if not isinstance(source, ImportanceEngine):
        raise ConfigError(f"cannot scan a {type(source).__name__}")

    estimates = [source.estimate(level, eps) for level in t]
    raw = np.array([e.estimate for e in estimates])
    stderr = np.array([e.stderr for e in estimates])
    hits = np.array([e.hits for e in estimates])

    return ScanResult(
        t=t, raw=raw, stderr=stderr, scaled=ScanResult.scale(t, raw, exponent, use_log_factor),
        exponent=exponent, log_factor=use_log_factor, estimator="importance", hits=hits,
        insufficient_tail=bool((hits == 0).any()), kind="joint", xi=xi.tolist(),
        )


######################################################################
## angular measure

@dataclass
class SpectralEstimate:
    """
    histogram of the angular part ω of the exceedances s > s0; ω is
    parameterized in [0, 2] by its block norms (0 on the first block,
    2 on the second) within each sign sector of the representatives
    """
    s0: float
    sectors: list
    edges: np.ndarray
    counts: np.ndarray
    masses: np.ndarray
    mass_near_axes: float
    mass_stderr: float
    n_exceed: int
    orbit_counts: dict = field(default_factory=dict)
    insufficient_tail: bool = False

    def to_frame (self):
        rows = []

        for j, sector in enumerate(self.sectors):
            for b in range(len(self.edges) - 1):
                rows.append({
                    "sector": "".join("+" if s > 0 else "-" for s in sector),
                    "lo": self.edges[b],
                    "hi": self.edges[b + 1],
                    "count": int(self.counts[j, b]),
                    "mass": self.masses[j, b],
                    })

        return pd.DataFrame(rows)


    def sector_masses (self, sector):
        return self.masses[self.sectors.index(tuple(sector))]


def _orbits (cells, group):
    """
    orbit label of every sign cell under the group acting on the two
    representatives
    """
    acting = {g[:2] for g in group}
    label = {}

    for cell in cells:
        if cell in label:
            continue

        orbit = sorted({(cell[0] * g[0], cell[1] * g[1]) for g in acting})

        for member in orbit:
            label[member] = orbit[0]

    return label


def _angle (block):
    """
    position in [0, 2]: b2 on {b1 = 1}, 2 - b1 on {b2 = 1}
    """
    b1, b2 = block[:, 0], block[:, 1]
    return np.where(b1 >= b2, b2, 2.0 - b1)


def spectral_measure (batch, s0, bins=ANGULAR_BINS, margin=AXES_MARGIN):
    """
    angular histogram of {s > s0} outside the margin ‖ω^(j)‖ < `margin`
    around the blocks; the margin mass is reported separately

    :returns: SpectralEstimate
    """
    s = batch.polar[:, 0]
    above = s > s0
    n_exceed = int(above.sum())
    omega = batch.polar[above, 1:]
    owner = batch.block_of
    powered = np.abs(omega) ** batch.exponents
    block = np.column_stack([powered[:, owner == j].max(axis=1) for j in (0, 1)]) if n_exceed else np.zeros((0, 2))

    near = block.min(axis=1) < margin
    mass, stderr = _binomial(np.array(near.sum()), n_exceed)
    signs = np.where(omega[:, :2] >= 0.0, 1, -1)

    observed = {tuple(int(v) for v in row) for row in signs}
    label = _orbits(observed or {(1, 1)}, batch.sign_group)
    sectors = sorted(label)
    edges = np.linspace(0.0, 2.0, bins + 1)
    counts = np.zeros((len(sectors), bins), dtype=np.int64)

    keep = ~near
    position = _angle(block[keep])
    kept_signs = signs[keep]

    for j, sector in enumerate(sectors):
        in_sector = (kept_signs == sector).all(axis=1)
        counts[j], _ = np.histogram(position[in_sector], bins=edges)

    total = counts.sum()
    masses = counts / total if total else np.zeros(counts.shape)
    orbit_counts = {}

    for j, sector in enumerate(sectors):
        key = "".join("+" if v > 0 else "-" for v in label[sector])
        orbit_counts[key] = orbit_counts.get(key, 0) + int(counts[j].sum())

    return SpectralEstimate(
        s0=float(s0), sectors=sectors, edges=edges, counts=counts, masses=masses,
        mass_near_axes=float(mass), mass_stderr=float(stderr), n_exceed=n_exceed,
        orbit_counts=orbit_counts, insufficient_tail=n_exceed < MIN_EXCEEDANCES,
        )


######################################################################
## sign-group invariance

@dataclass
class KInvarianceTable:
    tau: float
    cells: list
    statistic: float
    dof: int
    p_value: float

    @property
    def passed (self):
        return self.p_value > 0.01


    def to_frame (self):
        return pd.DataFrame(self.cells)


def k_invariance_check (batch, tau=None, quantile=0.9, group=None):
    """
    counts of {σ1 X1 > τ^{1/α1}, σ2 X2 > τ^{1/α2}} per sign cell σ, with
    a chi-square homogeneity statistic across the members of every orbit
    of the sign group; `tau` defaults to a quantile of min_i |X_i|^{α_i}
    """
    scaled = np.abs(batch.xs[:, :2]) ** batch.alpha
    level = scaled.min(axis=1)
    tau = float(np.quantile(level, quantile)) if tau is None else float(tau)
    joint = level > tau
    signs = np.where(batch.xs[joint, :2] >= 0.0, 1, -1)
    observed = {tuple(int(v) for v in row) for row in signs} or {(1, 1)}
    label = _orbits(observed, group or batch.sign_group)

    cells = []

    for cell in sorted(label):
        count = int((signs == cell).all(axis=1).sum()) if len(signs) else 0
        cells.append({
            "sign1": cell[0],
            "sign2": cell[1],
            "count": count,
            "orbit": "".join("+" if v > 0 else "-" for v in label[cell]),
            })

    statistic = 0.0
    dof = 0

    for orbit in sorted({c["orbit"] for c in cells}):
        members = [c["count"] for c in cells if c["orbit"] == orbit]

        if len(members) > 1 and sum(members) > 0:
            statistic += float(stats.chisquare(members).statistic)
            dof += len(members) - 1

    p_value = float(stats.chi2.sf(statistic, dof)) if dof else 1.0
    return KInvarianceTable(tau=tau, cells=cells, statistic=statistic, dof=dof, p_value=p_value)


def flip_signs (batch, coordinate):
    """
    the same batch with one coordinate negated
    """
    xs = batch.xs.copy()
    xs[:, coordinate] = -xs[:, coordinate]
    polar = batch.polar.copy()
    polar[:, 1 + coordinate] = -polar[:, 1 + coordinate]
    return SampleBatch(
        xs=xs, block_norms=batch.block_norms, polar=polar, meta=dict(batch.meta),
        sign_group=batch.sign_group, alpha=batch.alpha,
        )


######################################################################
## mixed moments

@dataclass
class MomentEstimate:
    estimate: float
    stderr: float
    stability: bool
    tail_index: float = float("nan")


def product_tail_index (ev, xi):
    """
    largest s with sξ inside the finite-moment region {φ < 1, ξ_i < 1},
    i.e. the tail index of ‖X^(1)‖^{ξ1} ‖X^(2)‖^{ξ2}
    """
    xi = np.asarray(xi, dtype=float)

    if xi.max() <= 0.0:
        return float("inf")

    cap = 1.0 / xi.max()

    def excess (s):
        try:
            value = ev.phi(s * xi)[0] - 1.0
        except OutsideDomain:
            return 1.0

        return value if np.isfinite(value) else 1.0

    if excess(cap) < 0.0:
        return float(cap)

    return float(optimize.brentq(excess, 1e-6 * cap, cap, xtol=1e-10))


def hill_index (values, share=HILL_SHARE):
    """
    Hill estimate of the tail index from the top `share` of the sample,
    with its asymptotic standard error
    """
    values = np.sort(np.asarray(values, dtype=float))
    k = max(MIN_HITS, int(share * values.size))

    if values.size <= k or values[-k - 1] <= 0.0:
        return float("inf"), 0.0

    spacing = np.log(values[-k:] / values[-k - 1]).mean()

    if spacing <= 0.0:
        return float("inf"), 0.0

    index = 1.0 / spacing
    return float(index), float(index / np.sqrt(k))


def mixed_moment (batch, theta, ev=None, z=3.0):
    """
    running-mean estimate of E‖X^(1)‖^{ξ1} ‖X^(2)‖^{ξ2} with θ = ξ∘α, so
    that for d = 2 it is E|X1|^{θ1} |X2|^{θ2}

    the estimate is stable when the two batch halves agree within `z`
    combined standard errors and the product has a finite mean; its
    tail index comes from φ along the ray through ξ when an evaluator
    is given, otherwise from a Hill estimate on the batch
    """
    xi = np.asarray(theta, dtype=float) / batch.alpha
    values = batch.block_norms[:, 0] ** xi[0] * batch.block_norms[:, 1] ** xi[1]
    n = values.size

    if n < 8:
        return MomentEstimate(float(values.mean()) if n else float("nan"), float("nan"), False)

    est = values.mean()
    stderr = values.std(ddof=1) / np.sqrt(n)
    first, second = values[: n // 2], values[n // 2:]
    spread = np.hypot(first.std(ddof=1) / np.sqrt(first.size), second.std(ddof=1) / np.sqrt(second.size))
    agree = abs(first.mean() - second.mean()) <= z * spread

    if ev is not None:
        index = product_tail_index(ev, xi)
        finite = index > 1.0
    else:
        index, index_stderr = hill_index(values)
        finite = index - 2.0 * index_stderr > 1.0

    return MomentEstimate(float(est), float(stderr), bool(agree and finite), index)
