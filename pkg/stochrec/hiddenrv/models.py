#!/usr/bin/env python
# encoding: utf-8

"""
declarative model specifications for the joint law of the diagonal
matrix A and the vector B in the recursion X = AX + B, plus exact
samplers for each family
"""

from dataclasses import dataclass
from scipy import integrate, special
import hashlib
import importlib
import json
import numpy as np

from .errors import ConfigError, DegenerateModel, OutsideDomain, Unsupported


GH_NODES = 64
GH_CONVERGENCE_TOL = 1e-10


def _as_vector (value, name, size=2):
    vec = np.asarray(value, dtype=float).reshape(-1)

    if vec.shape != (size,):
        raise ConfigError(f"`{name}` must have {size} entries, got {vec.shape}")

    return vec


def _as_spd (value, name):
    mat = np.asarray(value, dtype=float)

    if mat.shape != (2, 2):
        raise ConfigError(f"`{name}` must be a 2x2 matrix")
    if not np.allclose(mat, mat.T):
        raise ConfigError(f"`{name}` must be symmetric")
    if np.linalg.eigvalsh(mat).min() <= 0.0:
        raise ConfigError(f"`{name}` must be strictly positive definite")

    return mat


######################################################################
## Gauss-Hermite moments for Gaussian-driven families

def _hermite_grid (nodes):
    """
    tensor grid of standard Gaussian nodes (z1, z2) with probability
    weights summing to one
    """
    x, w = np.polynomial.hermite.hermgauss(nodes)
    z = np.sqrt(2.0) * x
    w = w / np.sqrt(np.pi)
    z1, z2 = np.meshgrid(z, z, indexing="ij")
    return z1.ravel(), z2.ravel(), np.outer(w, w).ravel()


def _gh_moments_once (log_abs_a, theta, nodes):
    z1, z2, w = _hermite_grid(nodes)
    la1, la2 = log_abs_a(z1, z2)

    with np.errstate(over="raise", invalid="raise"):
        try:
            kernel = w * np.exp(theta[0] * la1 + theta[1] * la2)
        except FloatingPointError:
            raise OutsideDomain(f"quadrature overflow at theta={theta.tolist()}")

    logs = np.vstack([la1, la2])
    value = kernel.sum()
    grad = logs @ kernel
    hess = (logs * kernel) @ logs.T

    if not np.isfinite(value):
        raise OutsideDomain(f"quadrature overflow at theta={theta.tolist()}")

    return value, grad, hess


def gauss_hermite_moments (log_abs_a, theta, nodes=GH_NODES, logger=None):
    """
    (Φ, ∇Φ, ∇²Φ) at `theta` for Φ(θ) = E[|A1|^θ1 |A2|^θ2], where
    `log_abs_a(z1, z2)` maps independent standard Gaussians onto
    (log|A1|, log|A2|); a doubled-node pass checks convergence
    """
    theta = np.asarray(theta, dtype=float)
    value, grad, hess = _gh_moments_once(log_abs_a, theta, nodes)
    check, _, _ = _gh_moments_once(log_abs_a, theta, 2 * nodes)

    if abs(check - value) > GH_CONVERGENCE_TOL * max(1.0, abs(value)):
        if logger:
            logger.warning("Gauss-Hermite not converged at theta=%s: %.3e vs %.3e", theta.tolist(), value, check)

    return value, grad, hess


######################################################################
## model families

class _Family:
    """
    law of (diag A, B) for one model family
    """
    name = "generic"
    independent = False
    absolutely_continuous = False
    deterministic = False
    has_density = False

    def __init__ (self, dim=2):
        self.dim = dim


    def sample (self, rng, size):
        """
        returns arrays (a, b) of shape (size, dim)
        """
        raise NotImplementedError


    def log_mgf (self, theta):
        """
        closed form (value, gradient, hessian) of log Φ(θ) at `theta`,
        or None when the family has no closed form
        """
        return None


    def moments (self, theta, nodes=GH_NODES, logger=None):
        """
        deterministic quadrature of (Φ, ∇Φ, ∇²Φ)
        """
        raise Unsupported(f"no quadrature rule for the {self.name} family")


    def to_dict (self):
        return {"family": self.name}


class _Family_LogGaussian (_Family):
    """
    (log A1, log A2) ~ N(m, C), B ~ N(b_mean, Cov) independent of A
    """
    name = "log_gaussian"
    independent = True
    absolutely_continuous = True
    has_density = True

    def __init__ (self, m, C, b_mean=(0.0, 0.0), Cov=((1.0, 0.0), (0.0, 1.0))):
        super().__init__(dim=2)
        self.m = _as_vector(m, "m")
        self.C = _as_spd(C, "C")
        self.b_mean = _as_vector(b_mean, "b_mean")
        self.Cov = _as_spd(Cov, "Cov")
        self._chol_a = np.linalg.cholesky(self.C)
        self._chol_b = np.linalg.cholesky(self.Cov)


    def sample (self, rng, size):
        z = rng.standard_normal((size, 2))
        a = np.exp(self.m + z @ self._chol_a.T)
        e = rng.standard_normal((size, 2))
        b = self.b_mean + e @ self._chol_b.T
        return a, b


    def log_mgf (self, theta):
        theta = np.asarray(theta, dtype=float)
        value = self.m @ theta + 0.5 * theta @ self.C @ theta
        return value, self.m + self.C @ theta, self.C.copy()


    def moments (self, theta, nodes=GH_NODES, logger=None):
        m, L = self.m, self._chol_a

        def log_abs_a (z1, z2):
            return m[0] + L[0, 0] * z1, m[1] + L[1, 0] * z1 + L[1, 1] * z2

        return gauss_hermite_moments(log_abs_a, theta, nodes, logger)


    def to_dict (self):
        return {
            "family": self.name,
            "m": self.m.tolist(),
            "C": self.C.tolist(),
            "b_mean": self.b_mean.tolist(),
            "Cov": self.Cov.tolist(),
            }


class _Family_CccGarch (_Family):
    """
    A_i = b_i + c_i Z_i^2 with unit-variance Gaussians of correlation
    eta, B = a constant
    """
    name = "ccc_garch"
    independent = True
    has_density = True

    def __init__ (self, a, b, c, eta):
        super().__init__(dim=2)
        self.a = _as_vector(a, "a")
        self.b = _as_vector(b, "b")
        self.c = _as_vector(c, "c")
        self.eta = float(eta)

        for name, vec in (("a", self.a), ("b", self.b), ("c", self.c)):
            if (vec <= 0.0).any():
                raise ConfigError(f"ccc_garch `{name}` must be strictly positive")

        if not -1.0 < self.eta < 1.0:
            raise ConfigError("ccc_garch `eta` must lie in (-1, 1)")

        self.absolutely_continuous = abs(self.eta) < 1.0
        self._mix = np.sqrt(1.0 - self.eta ** 2)


    def _noise (self, z1, z2):
        return z1, self.eta * z1 + self._mix * z2


    def sample (self, rng, size):
        z = rng.standard_normal((size, 2))
        z1, z2 = self._noise(z[:, 0], z[:, 1])
        a = self.b + self.c * np.column_stack([z1, z2]) ** 2
        b = np.tile(self.a, (size, 1))
        return a, b


    def moments (self, theta, nodes=GH_NODES, logger=None):
        b, c = self.b, self.c

        def log_abs_a (z1, z2):
            y1, y2 = self._noise(z1, z2)
            return np.log(b[0] + c[0] * y1 ** 2), np.log(b[1] + c[1] * y2 ** 2)

        return gauss_hermite_moments(log_abs_a, theta, nodes, logger)


    def to_dict (self):
        return {
            "family": self.name,
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "c": self.c.tolist(),
            "eta": self.eta,
            }


class _Family_BekkDiag (_Family):
    """
    A = sum_l M_l A_l with i.i.d. standard Gaussian M_l and diagonal
    lag matrices A_l; B ~ N(0, Cov) independent of A
    """
    name = "bekk_diag"
    independent = True
    absolutely_continuous = True
    has_density = True

    def __init__ (self, lags, Cov):
        super().__init__(dim=2)
        lags = [np.asarray(lag, dtype=float) for lag in lags]

        if len(lags) < 2:
            raise ConfigError("bekk_diag needs at least two lag matrices")

        for lag in lags:
            if lag.shape != (2, 2) or lag[0, 1] != 0.0 or lag[1, 0] != 0.0:
                raise ConfigError("bekk_diag lag matrices must be 2x2 diagonal")

        self.lags = lags
        self.loadings = np.array([np.diag(lag) for lag in lags]).T

        if np.linalg.matrix_rank(self.loadings) < 2:
            raise ConfigError("bekk_diag lag entries must have rank 2")

        self.Cov = _as_spd(Cov, "Cov")
        self.cov_a = self.loadings @ self.loadings.T
        self._chol_a = np.linalg.cholesky(self.cov_a)
        self._chol_b = np.linalg.cholesky(self.Cov)


    def sample (self, rng, size):
        mix = rng.standard_normal((size, self.loadings.shape[1]))
        a = mix @ self.loadings.T
        e = rng.standard_normal((size, 2))
        b = e @ self._chol_b.T
        return a, b


    def _angular (self, theta):
        """
        angular averages of |l1.u|^θ1 |l2.u|^θ2 g(u) over the half circle
        for g in (1, log|l1.u|, log|l2.u|, products of the logs)
        """
        rows = self._chol_a
        breaks = sorted(np.mod(np.arctan2(-row[0], row[1]), np.pi) for row in rows)

        def integrand (psi):
            u = np.array([np.cos(psi), np.sin(psi)])
            proj = np.abs(rows @ u)
            if (proj == 0.0).any():
                return np.zeros(6)
            la = np.log(proj)
            k = np.exp(theta @ la)
            return k * np.array([1.0, la[0], la[1], la[0] ** 2, la[0] * la[1], la[1] ** 2])

        points = [p for p in breaks if 0.0 < p < np.pi]
        total = np.zeros(6)
        edges = [0.0] + points + [np.pi]

        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi - lo > 0.0:
                val, _ = integrate.quad_vec(integrand, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=400)
                total += val

        return total / np.pi


    def moments (self, theta, nodes=GH_NODES, logger=None):
        theta = np.asarray(theta, dtype=float)

        if (theta <= -1.0).any():
            raise OutsideDomain(f"E|A|^theta diverges at theta={theta.tolist()}")

        # radial part of a standard bivariate Gaussian: E[r^s (log r)^k]
        s = theta.sum()
        arg = 1.0 + 0.5 * s
        r0 = np.exp(0.5 * s * np.log(2.0) + special.gammaln(arg))
        drift = 0.5 * np.log(2.0) + 0.5 * special.digamma(arg)
        r1 = r0 * drift
        r2 = r0 * (drift ** 2 + 0.25 * special.polygamma(1, arg))

        g = self._angular(theta)
        g1, gl = g[0], g[1:3]
        gll = np.array([[g[3], g[4]], [g[4], g[5]]])

        value = r0 * g1
        grad = r1 * g1 + r0 * gl
        hess = r2 * g1 + r1 * (gl[:, None] + gl[None, :]) + r0 * gll
        return value, grad, hess


    def to_dict (self):
        return {
            "family": self.name,
            "lags": [lag.tolist() for lag in self.lags],
            "Cov": self.Cov.tolist(),
            }


class _Family_Custom (_Family):
    """
    user-supplied sampler `sampler(rng, size) -> (a, b)`, with optional
    closed-form `log_mgf(theta) -> (value, grad, hess)`
    """
    name = "custom"

    def __init__ (self, sampler, independent, dim=2, log_mgf=None, absolutely_continuous=None, label=None):
        super().__init__(dim=dim)

        if not callable(sampler):
            raise ConfigError("custom family needs a callable sampler")

        self.sampler = sampler
        self.independent = bool(independent)
        self._log_mgf = log_mgf
        self.absolutely_continuous = absolutely_continuous
        self.label = label or getattr(sampler, "__qualname__", repr(sampler))


    def sample (self, rng, size):
        a, b = self.sampler(rng, size)
        return np.asarray(a, dtype=float).reshape(size, self.dim), np.asarray(b, dtype=float).reshape(size, self.dim)


    def log_mgf (self, theta):
        if self._log_mgf is None:
            return None

        value, grad, hess = self._log_mgf(np.asarray(theta, dtype=float))
        return float(value), np.asarray(grad, dtype=float), np.asarray(hess, dtype=float)


    def to_dict (self):
        return {"family": self.name, "sampler": self.label, "independent": self.independent}


class _Family_Constant (_Family_Custom):
    """
    deterministic A and B, the degenerate preset of the custom family
    """
    name = "constant"
    deterministic = True

    def __init__ (self, a, b):
        self.a_const = np.asarray(a, dtype=float).reshape(-1)
        self.b_const = np.asarray(b, dtype=float).reshape(-1)

        if self.a_const.shape != self.b_const.shape or self.a_const.size < 2:
            raise ConfigError("constant family needs `a` and `b` of equal length >= 2")

        super().__init__(
            sampler=self._draw,
            independent=True,
            dim=self.a_const.size,
            log_mgf=self._closed_form,
            absolutely_continuous=False,
            label="constant",
            )


    def _draw (self, rng, size):
        return np.tile(self.a_const, (size, 1)), np.tile(self.b_const, (size, 1))


    def _closed_form (self, theta):
        with np.errstate(divide="ignore"):
            logs = np.log(np.abs(self.a_const[:2]))
        return theta @ logs, logs, np.zeros((2, 2))


    def to_dict (self):
        return {"family": self.name, "a": self.a_const.tolist(), "b": self.b_const.tolist()}


######################################################################
## specification and draws

@dataclass(frozen=True)
class ModelSpec:
    """
    immutable description of a model: the family law, its dimension and
    the declared two-block partition of the coordinates (0-based)
    """
    family: _Family
    dim: int = 2
    blocks: tuple = ((0,), (1,))
    ratios: tuple = ()
    seed: int = None

    def __post_init__ (self):
        if self.dim < 2 or self.family.dim != self.dim:
            raise ConfigError(f"dimension mismatch: spec {self.dim}, family {self.family.dim}")

        j1, j2 = (tuple(int(i) for i in block) for block in self.blocks)
        object.__setattr__(self, "blocks", (j1, j2))

        if not j1 or not j2:
            raise ConfigError("both blocks must be nonempty")
        if set(j1) & set(j2):
            raise ConfigError("blocks must be disjoint")
        if set(j1) | set(j2) != set(range(self.dim)):
            raise ConfigError("blocks must cover every coordinate")
        if 0 not in j1 or 1 not in j2:
            raise ConfigError("coordinate 1 must be in the first block and coordinate 2 in the second")

        ratios = tuple(float(r) for r in self.ratios) or (1.0,) * self.dim

        if len(ratios) != self.dim or min(ratios) <= 0.0:
            raise ConfigError("`ratios` must hold one positive exponent ratio per coordinate")
        if ratios[0] != 1.0 or ratios[1] != 1.0:
            raise ConfigError("block representatives must have ratio 1")

        object.__setattr__(self, "ratios", ratios)


    @property
    def block_of (self):
        """
        block index (0 or 1) of every coordinate
        """
        owner = np.zeros(self.dim, dtype=int)
        owner[list(self.blocks[1])] = 1
        return owner


    def coordinate_alpha (self, alpha):
        """
        per-coordinate exponents α_i from the two representatives
        """
        alpha = np.asarray(alpha, dtype=float)
        return alpha[self.block_of] * np.asarray(self.ratios)


    def to_dict (self):
        meta = self.family.to_dict()
        meta.update({"dim": self.dim, "blocks": [list(b) for b in self.blocks], "ratios": list(self.ratios)})
        return meta


    def fingerprint (self):
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass
class AbDraw:
    """
    a batch of draws of (diag A, B); `k` holds the signs of `a` and `u`
    is filled in once α is known
    """
    a: np.ndarray
    b: np.ndarray
    k: np.ndarray
    u: np.ndarray = None

    def with_alpha (self, alpha):
        with np.errstate(divide="ignore"):
            self.u = np.asarray(alpha, dtype=float) * np.log(np.abs(self.a[:, :2]))
        return self


def sample_ab (spec, rng, size=1):
    """
    draw `size` i.i.d. copies of (diag A, B) from the model family

    :param spec: validated model specification.
    :type spec: ModelSpec.

    :param rng: seeded stream.
    :type rng: numpy.random.Generator.

    :returns: AbDraw with (size, d) arrays
    """
    a, b = spec.family.sample(rng, size)

    if (a == 0.0).any():
        raise DegenerateModel(f"{spec.family.name} sampler produced A_i = 0", count=int((a == 0.0).sum()))

    return AbDraw(a=a, b=b, k=np.sign(a).astype(np.int8))


def closed_form_log_mgf (spec, theta):
    """
    log Φ(θ) = log E[|A1|^θ1 |A2|^θ2] when the family has a closed form,
    else None
    """
    result = spec.family.log_mgf(np.asarray(theta, dtype=float))
    return None if result is None else float(result[0])


def check_blocks (spec, alpha, rng, n=10_000, rtol=1e-12):
    """
    verify the declared partition: within a block, |a_i|^α_i equals
    the representative's value on every draw
    """
    draw = sample_ab(spec, rng, n)
    exponents = spec.coordinate_alpha(alpha)
    powered = np.abs(draw.a) ** exponents
    reps = powered[:, [spec.blocks[0][0], spec.blocks[1][0]]]
    gap = np.abs(powered - reps[:, spec.block_of])
    worst = float((gap / np.maximum(reps[:, spec.block_of], 1e-300)).max())
    return worst <= rtol, worst


######################################################################
## configuration

MODEL_KEYS = {
    "log_gaussian": {"m", "C", "b_mean", "Cov"},
    "ccc_garch": {"a", "b", "c", "eta"},
    "bekk_diag": {"lags", "Cov"},
    "custom": {"sampler", "independent", "dim", "log_mgf"},
    "constant": {"a", "b"},
    }

COMMON_KEYS = {"family", "blocks", "ratios", "seed"}


def _resolve (path):
    """
    import `package.module:attribute`
    """
    try:
        module_name, attr = path.split(":")
        return getattr(importlib.import_module(module_name), attr)
    except (ValueError, ImportError, AttributeError) as e:
        raise ConfigError(f"cannot import `{path}`: {e}")


def spec_from_config (section):
    """
    build a ModelSpec from a mapping of already-decoded config values
    """
    values = dict(section)
    family = values.get("family")

    if family not in MODEL_KEYS:
        raise ConfigError(f"unknown model family `{family}`")

    unknown = set(values) - COMMON_KEYS - MODEL_KEYS[family]

    if unknown:
        raise ConfigError(f"unknown keys for family {family}: {sorted(unknown)}")

    def need (key):
        if key not in values:
            raise ConfigError(f"family {family} requires `{key}`")
        return values[key]

    if family == "log_gaussian":
        law = _Family_LogGaussian(
            need("m"), need("C"),
            b_mean=values.get("b_mean", (0.0, 0.0)),
            Cov=values.get("Cov", np.eye(2)),
            )
    elif family == "ccc_garch":
        law = _Family_CccGarch(need("a"), need("b"), need("c"), need("eta"))
    elif family == "bekk_diag":
        law = _Family_BekkDiag(need("lags"), values.get("Cov", np.eye(2)))
    elif family == "constant":
        law = _Family_Constant(need("a"), need("b"))
    else:
        log_mgf = _resolve(values["log_mgf"]) if "log_mgf" in values else None
        law = _Family_Custom(
            _resolve(need("sampler")),
            independent=need("independent"),
            dim=int(values.get("dim", 2)),
            log_mgf=log_mgf,
            label=values["sampler"],
            )

    blocks = values.get("blocks")
    blocks = tuple(tuple(i - 1 for i in block) for block in blocks) if blocks else ((0,), (1,)) if law.dim == 2 else None

    if blocks is None:
        raise ConfigError("`blocks` must be declared when d > 2")

    seed = values.get("seed")
    return ModelSpec(
        family=law,
        dim=law.dim,
        blocks=blocks,
        ratios=tuple(values.get("ratios", ())),
        seed=None if seed is None else int(seed),
        )


def log_gaussian (m, C, b_mean=(0.0, 0.0), Cov=((1.0, 0.0), (0.0, 1.0)), seed=None):
    return ModelSpec(family=_Family_LogGaussian(m, C, b_mean, Cov), seed=seed)


def ccc_garch (a, b, c, eta, seed=None):
    return ModelSpec(family=_Family_CccGarch(a, b, c, eta), seed=seed)


def bekk_diag (lags, Cov=((1.0, 0.0), (0.0, 1.0)), seed=None):
    return ModelSpec(family=_Family_BekkDiag(lags, Cov), seed=seed)


def constant (a, b, seed=None):
    law = _Family_Constant(a, b)
    return ModelSpec(family=law, dim=law.dim, blocks=((0,), tuple(range(1, law.dim))), seed=seed)


def custom (sampler, independent, dim=2, blocks=None, ratios=(), log_mgf=None, absolutely_continuous=None, seed=None):
    law = _Family_Custom(sampler, independent, dim=dim, log_mgf=log_mgf, absolutely_continuous=absolutely_continuous)
    return ModelSpec(family=law, dim=dim, blocks=blocks or ((0,), (1,)), ratios=ratios, seed=seed)
