#!/usr/bin/env python
# encoding: utf-8

"""
Monte Carlo engines: stationary-law simulation of X = AX + B, the
truncated perpetuity, Esscher-tilted random walks, and importance
sampled joint exceedance probabilities
"""

from dataclasses import dataclass, field
from multiprocessing import Pool
from scipy import stats
import json
import math
import numpy as np
import pandas as pd
import zipfile

from .errors import ConfigError, NonContracting, RejectionStall
from .mgf import PhiEvaluator, TailIndices
from .models import sample_ab


CHAINS_PER_STREAM = 64
PATHS_PER_STREAM = 8192
SIGN_DRAWS = 1_000
FIRST_BLOCK = 4_096
PILOT_DRAWS = 10_000
MIN_ACCEPTANCE = 1e-4
MAX_BATCH = 1_000_000
CRUDE_MAX_T = 50.0
GAUSS_NODES = 32


@dataclass
class SimulationConfig:
    n_samples: int
    burn_in: int = 10_000
    seed: int = 0
    thinning: int = 1
    n_chains: int = 256
    workers: int = 1

    def __post_init__ (self):
        if self.n_samples <= 0:
            raise ConfigError("`n_samples` must be positive")
        if self.burn_in < 0:
            raise ConfigError("`burn_in` must be nonnegative")
        if self.thinning < 1 or self.n_chains < 1 or self.workers < 1:
            raise ConfigError("`thinning`, `n_chains` and `workers` must be at least 1")

        self.seed = int(self.seed) & (2 ** 64 - 1)


    def to_dict (self):
        # the worker count never changes results, so it stays out of the record
        return {
            "n_samples": self.n_samples,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "thinning": self.thinning,
            "n_chains": self.n_chains,
            }


######################################################################
## seeded streams

def stream_seeds (seed, n_streams):
    """
    independent child seeds; the count depends on the workload only
    """
    return np.random.SeedSequence(seed).spawn(n_streams)


def map_streams (worker, tasks, workers=1):
    """
    run `worker` over per-stream tasks, in a process pool when asked;
    results come back in stream order
    """
    if workers > 1 and len(tasks) > 1:
        with Pool(processes=min(workers, len(tasks))) as pool:
            return pool.map(worker, tasks)

    return [worker(task) for task in tasks]


def _split (total, per_stream):
    n_streams = max(1, math.ceil(total / per_stream))
    sizes = [per_stream] * (n_streams - 1)
    sizes.append(total - per_stream * (n_streams - 1))
    return sizes


######################################################################
## norm-like function and polar coordinates

def norm_alpha (x, exponents):
    """
    ‖x‖_α = max_i |x_i|^α_i, row-wise
    """
    return (np.abs(np.atleast_2d(x)) ** exponents).max(axis=1)


def block_norms (x, spec, exponents):
    """
    (‖x^(1)‖_α, ‖x^(2)‖_α) row-wise
    """
    powered = np.abs(np.atleast_2d(x)) ** exponents
    owner = spec.block_of
    return np.column_stack([powered[:, owner == j].max(axis=1) for j in (0, 1)])


def to_polar (x, exponents):
    """
    rows (s, ω) with x = s^{1/α}∘ω and ‖ω‖_α = 1; the origin maps to s = 0, ω = 0
    """
    x = np.atleast_2d(x)
    s = norm_alpha(x, exponents)
    safe = np.where(s > 0.0, s, 1.0)
    omega = np.where(s[:, None] > 0.0, x / safe[:, None] ** (1.0 / exponents), 0.0)
    return np.column_stack([s, omega])


def from_polar (polar, exponents):
    polar = np.atleast_2d(polar)
    return polar[:, :1] ** (1.0 / exponents) * polar[:, 1:]


def sign_group (signs):
    """
    the group generated by the observed sign vectors under entrywise
    multiplication, as a sorted tuple of tuples
    """
    gens = {tuple(int(v) for v in row) for row in np.atleast_2d(signs)}
    group = {tuple([1] * len(next(iter(gens))))} if gens else {(1,)}
    frontier = set(group)

    while frontier:
        new = {tuple(a * b for a, b in zip(g, h)) for g in frontier for h in gens} - group
        group |= new
        frontier = new

    return tuple(sorted(group))


######################################################################
## sample batches

@dataclass
class SampleBatch:
    """
    stationary draws of X with their block norms and polar coordinates;
    `alpha` holds the two block representatives
    """
    xs: np.ndarray
    block_norms: np.ndarray
    polar: np.ndarray
    meta: dict = field(default_factory=dict)
    sign_group: tuple = ((1, 1),)
    alpha: np.ndarray = None

    @classmethod
    def build (cls, spec, alpha, xs, meta, signs):
        alpha = np.asarray(alpha, dtype=float)
        exponents = spec.coordinate_alpha(alpha)
        meta = dict(meta)
        meta["fingerprint"] = spec.fingerprint()
        meta["exponents"] = exponents.tolist()
        meta["blocks"] = [list(b) for b in spec.blocks]

        return cls(
            xs=xs,
            block_norms=block_norms(xs, spec, exponents) if len(xs) else np.zeros((0, 2)),
            polar=to_polar(xs, exponents) if len(xs) else np.zeros((0, 1 + spec.dim)),
            meta=meta,
            sign_group=sign_group(signs),
            alpha=alpha,
            )


    @property
    def exponents (self):
        return np.asarray(self.meta["exponents"])


    @property
    def block_of (self):
        owner = np.zeros(self.xs.shape[1], dtype=int)
        owner[list(self.meta["blocks"][1])] = 1
        return owner


    def __len__ (self):
        return self.xs.shape[0]


    def to_frame (self):
        """
        one row per sample: x1..xd, s, omega1..omegad
        """
        d = self.xs.shape[1]
        data = {f"x{i + 1}": self.xs[:, i] for i in range(d)}
        data["s"] = self.polar[:, 0]
        data.update({f"omega{i + 1}": self.polar[:, i + 1] for i in range(d)})
        return pd.DataFrame(data)


    def to_csv (self, path):
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


    def save (self, path):
        """
        compressed binary cache with a JSON header
        """
        header = dict(self.meta)
        header["count"] = len(self)
        header["sign_group"] = [list(g) for g in self.sign_group]
        header["alpha"] = None if self.alpha is None else [float(a) for a in self.alpha]
        arrays = {"xs": self.xs, "header": np.array(json.dumps(header, sort_keys=True))}

        # fixed member timestamps keep the archive byte-identical across runs
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as archive:
            for name, array in arrays.items():
                info = zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
                info.compress_type = zipfile.ZIP_DEFLATED

                with archive.open(info, "w") as f:
                    np.lib.format.write_array(f, np.asarray(array), allow_pickle=False)


    @classmethod
    def load (cls, path, spec):
        """
        reload a cache written by `save`, refusing caches of another model
        """
        with np.load(path) as data:
            header = json.loads(str(data["header"]))
            xs = data["xs"]

        if header.get("fingerprint") != spec.fingerprint():
            raise ConfigError(f"cache {path} was written for model {header.get('fingerprint')}, not {spec.fingerprint()}")

        signs = np.array(header.pop("sign_group"))
        alpha = header.pop("alpha")
        header.pop("count", None)
        return cls.build(spec, alpha, xs, header, signs)


def _alpha_vector (alpha):
    return alpha.alpha if isinstance(alpha, TailIndices) else np.asarray(alpha, dtype=float)


def _observed_signs (spec, seed_seq):
    rng = np.random.default_rng(seed_seq)
    return sample_ab(spec, rng, SIGN_DRAWS).k


######################################################################
## stationary law

def _chain_worker (task):
    """
    burn in and record one stream of chains; returns the recorded rows
    and the burn-in sums of log|A| for the drift diagnostic
    """
    spec, seed_seq, n_chains, burn_in, n_keep, thinning = task
    rng = np.random.default_rng(seed_seq)
    x = np.zeros((n_chains, spec.dim))
    log_sum = np.zeros(2)
    log_sq = np.zeros(2)

    for _ in range(burn_in):
        draw = sample_ab(spec, rng, n_chains)
        logs = np.log(np.abs(draw.a[:, :2]))
        log_sum += logs.sum(axis=0)
        log_sq += (logs ** 2).sum(axis=0)
        x = draw.a * x + draw.b

    rows = np.empty((n_keep, n_chains, spec.dim))

    for i in range(n_keep):
        for _ in range(thinning):
            draw = sample_ab(spec, rng, n_chains)
            x = draw.a * x + draw.b

        rows[i] = x

    return rows.reshape(-1, spec.dim), log_sum, log_sq, burn_in * n_chains


def _first_block (spec, seed_seq):
    """
    drift statistics of one block of draws taken before any chain
    runs, so a divergent model stops before the burn-in
    """
    rng = np.random.default_rng(seed_seq)
    draw = sample_ab(spec, rng, FIRST_BLOCK)

    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(draw.a[:, :2]))

    return None, logs.sum(axis=0), (logs ** 2).sum(axis=0), FIRST_BLOCK


def _check_contraction (stats_rows):
    count = sum(r[3] for r in stats_rows)

    if count < 2:
        return None

    total = sum(r[1] for r in stats_rows)
    squares = sum(r[2] for r in stats_rows)
    mean = total / count
    var = np.maximum(squares / count - mean ** 2, 0.0)
    stderr = np.sqrt(var / count)

    if (mean - 3.0 * stderr >= 0.0).any():
        raise NonContracting(f"E log|A_i| estimated at {mean.tolist()} over {count} draws", drift=mean.tolist())

    return mean


def simulate_stationary (spec, alpha, cfg, logger=None):
    """
    iterate X_n = A_n X_{n-1} + B_n from X_0 = 0 in `cfg.n_chains`
    vectorised chains, then record every `thinning`-th state

    :param spec: model specification.
    :type spec: ModelSpec.

    :param alpha: tail indices of the two block representatives.
    :type alpha: TailIndices or array.

    :param cfg: simulation settings.
    :type cfg: SimulationConfig.

    :returns: SampleBatch
    """
    alpha = _alpha_vector(alpha)
    n_chains = min(cfg.n_chains, cfg.n_samples)
    n_keep = math.ceil(cfg.n_samples / n_chains)
    sizes = _split(n_chains, CHAINS_PER_STREAM)
    seeds = stream_seeds(cfg.seed, len(sizes) + 2)
    tasks = [(spec, seeds[i], size, cfg.burn_in, n_keep, cfg.thinning) for i, size in enumerate(sizes)]

    _check_contraction([_first_block(spec, seeds[len(sizes) + 1])])
    results = map_streams(_chain_worker, tasks, cfg.workers)
    drift = _check_contraction(results)
    xs = np.concatenate([r[0] for r in results])[: cfg.n_samples]

    if logger:
        logger.debug("simulated %d states in %d streams, burn-in drift %s", len(xs), len(tasks), drift)

    meta = {"config": cfg.to_dict(), "method": "forward_recursion"}
    return SampleBatch.build(spec, alpha, xs, meta, _observed_signs(spec, seeds[len(sizes)]))


def empty_batch (spec, alpha, cfg):
    """
    a batch without rows, keeping the header of a real run
    """
    alpha = _alpha_vector(alpha)
    meta = {"config": cfg.to_dict() if cfg else None, "method": "forward_recursion"}
    return SampleBatch.build(spec, alpha, np.zeros((0, spec.dim)), meta, np.ones((1, spec.dim), dtype=int))


######################################################################
## perpetuity

def _perpetuity_worker (task):
    spec, seed_seq, n_paths, n_terms = task
    rng = np.random.default_rng(seed_seq)
    x = np.zeros((n_paths, spec.dim))
    prod = np.ones((n_paths, spec.dim))
    abs_b = np.zeros(spec.dim)
    log_a = np.zeros(spec.dim)

    for _ in range(n_terms):
        draw = sample_ab(spec, rng, n_paths)
        x += prod * draw.b
        prod *= draw.a
        abs_b += np.abs(draw.b).sum(axis=0)
        log_a += np.log(np.abs(draw.a)).sum(axis=0)

    return x, np.abs(prod).max(axis=0), abs_b, log_a, n_paths * n_terms


def perpetuity_truncated (spec, alpha, n_terms, cfg, reference=None, logger=None):
    """
    independent draws of X = sum_k A_1...A_{k-1} B_k truncated after
    `n_terms` terms; the remainder is bounded geometrically from the
    final running product, and the KS distance to a `reference` batch
    is reported when one is given

    :returns: SampleBatch with `meta["tail_bound"]` and `meta["ks"]`
    """
    if n_terms < 1:
        raise ConfigError("`n_terms` must be at least 1")

    alpha = _alpha_vector(alpha)
    sizes = _split(cfg.n_samples, PATHS_PER_STREAM)
    seeds = stream_seeds(cfg.seed, len(sizes) + 1)
    tasks = [(spec, seeds[i], size, n_terms) for i, size in enumerate(sizes)]
    results = map_streams(_perpetuity_worker, tasks, cfg.workers)

    xs = np.concatenate([r[0] for r in results])
    count = sum(r[4] for r in results)
    max_prod = np.max([r[1] for r in results], axis=0)
    mean_b = sum(r[2] for r in results) / count
    rate = np.exp(sum(r[3] for r in results) / count)

    with np.errstate(divide="ignore"):
        bound = np.where(rate < 1.0, max_prod * mean_b / (1.0 - rate), np.inf)

    meta = {"config": cfg.to_dict(), "method": "perpetuity", "n_terms": n_terms, "tail_bound": bound.tolist()}

    if reference is not None and len(reference):
        meta["ks"] = [float(stats.ks_2samp(xs[:, i], reference.xs[:, i]).statistic) for i in range(spec.dim)]

    if logger:
        logger.debug("perpetuity with %d terms, tail bound %s, ks %s", n_terms, meta["tail_bound"], meta.get("ks"))

    return SampleBatch.build(spec, alpha, xs, meta, _observed_signs(spec, seeds[-1]))


######################################################################
## Esscher tilt

@dataclass
class EsscherTilt:
    """
    the law of (U, K) under dP_ξ = e^{<ξ, U>} dP, with tilted drift m_ξ;
    log-Gaussian models are tilted exactly by a Gaussian mean shift, other
    families by rejection against the base law with envelope `window`
    """
    spec: object
    alpha: np.ndarray
    xi: np.ndarray
    drift: np.ndarray
    cov: np.ndarray = None
    window: float = 1.0
    exact: bool = False
    mean: np.ndarray = None
    chol: np.ndarray = None

    @classmethod
    def build (cls, ev, xi, window=None, tol=1e-8, seed=0):
        """
        tilt at a point of the level set {φ = 1}
        """
        xi = np.asarray(xi, dtype=float)
        value, stderr = ev.phi(xi)

        if abs(value - 1.0) > max(tol, 3.0 * stderr):
            raise ConfigError(f"tilt needs φ(ξ) = 1, got {value:.12g} at ξ = {xi.tolist()}")

        drift, cov = ev.tilted_moments(xi)
        tilt = cls(spec=ev.spec, alpha=ev.alpha, xi=xi, drift=drift, cov=cov)
        family = ev.spec.family

        if family.name == "log_gaussian":
            lam = np.diag(ev.alpha)
            tilt.exact = True
            tilt.mean = lam @ (family.m + family.C @ lam @ xi)
            tilt.chol = np.linalg.cholesky(lam @ family.C @ lam)
        elif not xi.any():
            tilt.window = 1.0
        else:
            tilt.window = window if window is not None else tilt._pilot_window(seed)

        if 1.0 / tilt.window < MIN_ACCEPTANCE:
            raise RejectionStall(f"envelope {tilt.window:.3g} gives acceptance below {MIN_ACCEPTANCE}")

        return tilt


    def _pilot_window (self, seed):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7117]))
        draw = sample_ab(self.spec, rng, PILOT_DRAWS).with_alpha(self.alpha)
        return float(1.5 * np.exp(draw.u @ self.xi).max())


    def sample (self, rng, size):
        """
        (u, k) arrays of shape (size, 2) and (size, d) under P_ξ
        """
        if self.exact:
            u = self.mean + rng.standard_normal((size, 2)) @ self.chol.T
            return u, np.ones((size, self.spec.dim), dtype=np.int8)

        us, ks = [], []
        have = drawn = accepted = 0

        while have < size:
            batch = min(MAX_BATCH, max(1024, int(1.2 * (size - have) * self.window)))
            draw = sample_ab(self.spec, rng, batch).with_alpha(self.alpha)
            keep = rng.random(batch) * self.window < np.exp(draw.u @ self.xi)
            drawn += batch
            accepted += int(keep.sum())

            if drawn >= PILOT_DRAWS and accepted < MIN_ACCEPTANCE * drawn:
                raise RejectionStall(f"acceptance {accepted / drawn:.2e} below {MIN_ACCEPTANCE}")

            us.append(draw.u[keep])
            ks.append(draw.k[keep])
            have += int(keep.sum())

        return np.concatenate(us)[:size], np.concatenate(ks)[:size]


    def identity (self):
        """
        the untilted law with the same sampler
        """
        base = EsscherTilt(spec=self.spec, alpha=self.alpha, xi=np.zeros(2), drift=None)

        if self.exact:
            family = self.spec.family
            lam = np.diag(self.alpha)
            base.exact = True
            base.mean = lam @ family.m
            base.chol = self.chol
            base.drift = base.mean

        return base


@dataclass
class WalkPath:
    s: np.ndarray
    l: np.ndarray


def tilted_walk (spec, alpha, tilt, n_steps, rng):
    """
    one path (S_n, L_n), n = 0..n_steps, of the walk S_n = U_1 + ... + U_n
    with sign component L_n = K_1...K_n under the tilted law
    """
    u, k = tilt.sample(rng, n_steps)
    s = np.vstack([np.zeros(2), np.cumsum(u, axis=0)])
    l = np.vstack([np.ones(spec.dim, dtype=np.int8), np.cumprod(k, axis=0)])
    return WalkPath(s=s, l=l)


######################################################################
## joint exceedance by first passage

@dataclass
class ExceedanceEstimate:
    t: float
    eps: float
    estimate: float
    stderr: float
    hits: int
    n_paths: int
    n_cap: int
    zero_hits: bool
    crude: float = None
    crude_stderr: float = None

    def serialize (self):
        return dict(self.__dict__)


def _exceedance_worker (task):
    tilt, seed_seq, n_paths, levels, n_cap = task
    rng = np.random.default_rng(seed_seq)
    s = np.zeros((n_paths, 2))
    active = np.ones(n_paths, dtype=bool)
    weight = np.zeros(n_paths)

    for _ in range(n_cap):
        idx = np.flatnonzero(active)

        if not idx.size:
            break

        u, _ = tilt.sample(rng, idx.size)
        s[idx] += u
        done = idx[(s[idx] > levels).all(axis=1)]
        weight[done] = np.exp(-(s[done] @ tilt.xi))
        active[done] = False

    hits = n_paths - int(active.sum())
    return weight.sum(), (weight ** 2).sum(), hits, n_paths


def _reduce (results):
    total = sum(r[0] for r in results)
    squares = sum(r[1] for r in results)
    hits = sum(r[2] for r in results)
    n = sum(r[3] for r in results)
    mean = total / n
    var = max(squares / n - mean ** 2, 0.0)
    return mean, math.sqrt(var / max(n - 1, 1)), hits, n


def _as_xi (xi_star):
    return np.asarray(getattr(xi_star, "xi_star", xi_star), dtype=float)


def joint_exceedance_prob (spec, alpha, xi_star, t, eps, cfg, ev=None, tilt=None, crude=None, logger=None):
    """
    importance-sampling estimate of P(∃ n ≤ N: e^{S_n1} > t, e^{S_n2} > εt)
    with the first-passage weight e^{-<ξ*, S_τ>} and the step cap
    N = ⌈4 log t / ρ⌉, ρ the common tilted drift; for small t the crude
    estimate under the base law is returned alongside

    :param cfg: `n_samples` is the number of paths.
    :type cfg: SimulationConfig.

    :returns: ExceedanceEstimate
    """
    if t <= 1.0 or eps <= 0.0:
        raise ConfigError("exceedance needs t > 1 and eps > 0")

    ev = ev or PhiEvaluator(spec, alpha)
    tilt = tilt or EsscherTilt.build(ev, _as_xi(xi_star), seed=cfg.seed)
    rho = float(tilt.drift.mean())

    if rho <= 0.0:
        raise ConfigError(f"tilted drift {tilt.drift.tolist()} is not positive")

    n_cap = math.ceil(4.0 * math.log(t) / rho)
    levels = np.array([math.log(t), math.log(eps * t)])
    sizes = _split(cfg.n_samples, PATHS_PER_STREAM)
    seeds = stream_seeds(cfg.seed, 2 * len(sizes))

    tasks = [(tilt, seeds[i], size, levels, n_cap) for i, size in enumerate(sizes)]
    mean, stderr, hits, n = _reduce(map_streams(_exceedance_worker, tasks, cfg.workers))
    result = ExceedanceEstimate(
        t=float(t), eps=float(eps), estimate=mean, stderr=stderr,
        hits=hits, n_paths=n, n_cap=n_cap, zero_hits=hits == 0,
        )

    if crude or (crude is None and t <= CRUDE_MAX_T):
        base = tilt.identity()
        tasks = [(base, seeds[len(sizes) + i], size, levels, n_cap) for i, size in enumerate(sizes)]
        result.crude, result.crude_stderr, _, _ = _reduce(map_streams(_exceedance_worker, tasks, cfg.workers))

    if logger:
        logger.debug("P(t=%g, eps=%g) = %.4e ± %.1e from %d hits, cap %d", t, eps, mean, stderr, hits, n_cap)

    return result


######################################################################
## Gaussian leading term for a single box

@dataclass
class BoxEstimate:
    n0: int
    n: int
    corner: np.ndarray
    mc: float
    mc_stderr: float
    gauss: float
    weight: float
    integral: float
    crude: float = None
    crude_stderr: float = None

    def serialize (self):
        out = dict(self.__dict__)
        out["corner"] = self.corner.tolist()
        return out


def _box_worker (task):
    tilt, seed_seq, n_paths, n_steps, corner = task
    rng = np.random.default_rng(seed_seq)
    s = np.zeros((n_paths, 2))

    for _ in range(n_steps):
        s += tilt.sample(rng, n_paths)[0]

    inside = ((s > corner) & (s < corner + 1.0)).all(axis=1)
    weight = np.where(inside, np.exp(-(s @ tilt.xi)), 0.0)
    return weight.sum(), (weight ** 2).sum(), int(inside.sum()), n_paths


def _gauss_box (tilt, n, corner):
    """
    e^{-<ξ, corner>} and the integral over the unit box at `corner` of
    e^{-<ξ, s - corner>} times the N(n m_ξ, n Σ_ξ) density
    """
    x, w = np.polynomial.legendre.leggauss(GAUSS_NODES)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    g1, g2 = np.meshgrid(x, x, indexing="ij")
    offsets = np.column_stack([g1.ravel(), g2.ravel()])
    weights = np.outer(w, w).ravel()

    density = stats.multivariate_normal(mean=n * tilt.drift, cov=n * tilt.cov).pdf(corner + offsets)
    integral = float(weights @ (np.exp(-(offsets @ tilt.xi)) * density))
    return float(np.exp(-(corner @ tilt.xi))), integral


def walk_box_prob (spec, alpha, xi_star, t, ell, eps, cfg, shift=0.0, ev=None, tilt=None, crude=False, logger=None):
    """
    P(I_n) for n = n0 + ell, n0 = ⌈log t / ρ⌉ and the unit box
    I_n = {n0 ρ < S_n1 < n0 ρ + 1, n0 ρ + log ε < S_n2 < n0 ρ + log ε + 1},
    moved by `shift` along the diagonal; `mc` is the tilted estimate
    reweighted to the base law, `gauss` the Gaussian leading term

    :returns: BoxEstimate
    """
    ev = ev or PhiEvaluator(spec, alpha)
    tilt = tilt or EsscherTilt.build(ev, _as_xi(xi_star), seed=cfg.seed)
    rho = float(tilt.drift.mean())
    n0 = math.ceil(math.log(t) / rho)

    if ell > math.sqrt(n0):
        raise ConfigError(f"ell = {ell} exceeds sqrt(n0) = {math.sqrt(n0):.3g}")

    n = n0 + ell
    corner = np.array([n0 * rho, n0 * rho + math.log(eps)]) + shift
    sizes = _split(cfg.n_samples, PATHS_PER_STREAM)
    seeds = stream_seeds(cfg.seed, 2 * len(sizes))

    tasks = [(tilt, seeds[i], size, n, corner) for i, size in enumerate(sizes)]
    mc, mc_stderr, hits, _ = _reduce(map_streams(_box_worker, tasks, cfg.workers))
    weight, integral = _gauss_box(tilt, n, corner)

    result = BoxEstimate(
        n0=n0, n=n, corner=corner, mc=mc, mc_stderr=mc_stderr,
        gauss=weight * integral, weight=weight, integral=integral,
        )

    if crude:
        base = tilt.identity()
        tasks = [(base, seeds[len(sizes) + i], size, n, corner) for i, size in enumerate(sizes)]
        result.crude, result.crude_stderr, _, _ = _reduce(map_streams(_box_worker, tasks, cfg.workers))

    if logger:
        logger.debug("box at %s, n=%d: mc %.4e ± %.1e (%d hits), gauss %.4e", corner.tolist(), n, mc, mc_stderr, hits, result.gauss)

    return result


class ImportanceEngine:
    """
    a reusable tilt at ξ* for scanning exceedance probabilities over t
    """

    def __init__ (self, spec, alpha, xi_star, cfg, ev=None, logger=None):
        self.spec = spec
        self.alpha = _alpha_vector(alpha)
        self.xi_star = _as_xi(xi_star)
        self.cfg = cfg
        self.ev = ev or PhiEvaluator(spec, alpha)
        self.tilt = EsscherTilt.build(self.ev, self.xi_star, seed=cfg.seed)
        self.logger = logger


    def estimate (self, t, eps=1.0):
        return joint_exceedance_prob(
            self.spec, self.alpha, self.xi_star, t, eps, self.cfg,
            ev=self.ev, tilt=self.tilt, crude=False, logger=self.logger,
            )
