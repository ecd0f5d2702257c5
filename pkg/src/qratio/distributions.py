"""Analytic distributions used in the simulation studies, and their samplers.

Lognormal, exponential and Pareto II samples are drawn by inverse-CDF from the
uniform stream of a PCG64 generator, so a given seed gives the same sample on
any platform that reproduces PCG64. Gamma and chi-square samples use numpy's
``standard_gamma`` (Marsaglia-Tsang).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np
from scipy.special import gammainc, gammaincinv, gammaln, ndtr, ndtri

from .errors import ConfigError, DegenerateSample
from .quantile_core import Sample, sort_sample

# Shifts numpy's [0, 1) uniforms onto the open interval (0, 1).
_HALF_ULP = 2.0 ** -54


def make_rng(seed):
    """A PCG64 ``Generator`` from an int, a ``SeedSequence`` or an existing generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(seed))


def replication_rng(master_seed, stream, rep):
    """Independent generator for replication ``rep`` of sample stream ``stream``.

    Derived as ``SeedSequence(master_seed, spawn_key=(stream, rep))``, so the
    draw depends only on these three integers and never on scheduling.
    """
    return make_rng(np.random.SeedSequence(master_seed, spawn_key=(stream, rep)))


def open_uniform(rng, n):
    return rng.random(n) + _HALF_ULP


class _Family:
    family = ""

    def params(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_dict(self):
        return {"family": self.family, **self.params()}

    def params_label(self):
        return ";".join(f"{k}={v:g}" for k, v in self.params().items())

    def label(self):
        return f"{self.family}({self.params_label()})"

    def quantile_density(self, p):
        return 1.0 / self.pdf(self.quantile(p))


@dataclass(frozen=True)
class Lognormal(_Family):
    mu: float = 0.0
    sigma: float = 1.0
    family = "lognormal"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError("lognormal sigma must be positive")

    def quantile(self, p):
        return np.exp(self.mu + self.sigma * ndtri(p))

    def quantile_density(self, p):
        u = ndtri(p)
        return self.sigma * np.exp(self.mu + self.sigma * u) * math.sqrt(2 * math.pi) * np.exp(0.5 * u * u)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x > 0, ndtr((np.log(np.where(x > 0, x, 1.0)) - self.mu) / self.sigma), 0.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        safe = np.where(x > 0, x, 1.0)
        z = (np.log(safe) - self.mu) / self.sigma
        return np.where(x > 0, np.exp(-0.5 * z * z) / (safe * self.sigma * math.sqrt(2 * math.pi)), 0.0)

    def draw(self, rng, n):
        return np.exp(self.mu + self.sigma * ndtri(open_uniform(rng, n)))


@dataclass(frozen=True)
class Exponential(_Family):
    rate: float = 1.0
    family = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise ConfigError("exponential rate must be positive")

    def quantile(self, p):
        return -np.log1p(-np.asarray(p, dtype=float)) / self.rate

    def quantile_density(self, p):
        return 1.0 / (self.rate * (1.0 - np.asarray(p, dtype=float)))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)

    def draw(self, rng, n):
        return -np.log1p(-open_uniform(rng, n)) / self.rate


@dataclass(frozen=True)
class ParetoII(_Family):
    """Lomax law ``F(x) = 1 - (1 + x)^(-a)`` on ``x > 0``."""

    a: float = 2.0
    family = "pareto2"

    def __post_init__(self):
        if not self.a > 0:
            raise ConfigError("Pareto shape must be positive")

    def quantile(self, p):
        return np.power(1.0 - np.asarray(p, dtype=float), -1.0 / self.a) - 1.0

    def quantile_density(self, p):
        return np.power(1.0 - np.asarray(p, dtype=float), -1.0 / self.a - 1.0) / self.a

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-self.a * np.log1p(np.maximum(x, 0.0))), 0.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.a * np.power(1.0 + np.maximum(x, 0.0), -self.a - 1.0), 0.0)

    def draw(self, rng, n):
        return np.power(open_uniform(rng, n), -1.0 / self.a) - 1.0


@dataclass(frozen=True)
class Gamma(_Family):
    shape: float = 1.0
    scale: float = 1.0
    family = "gamma"

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ConfigError("gamma shape and scale must be positive")

    def quantile(self, p):
        return self.scale * gammaincinv(self.shape, p)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, gammainc(self.shape, np.maximum(x, 0.0) / self.scale), 0.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        safe = np.where(x > 0, x, 1.0)
        logf = (
            (self.shape - 1.0) * np.log(safe)
            - safe / self.scale
            - gammaln(self.shape)
            - self.shape * math.log(self.scale)
        )
        return np.where(x > 0, np.exp(logf), 0.0)

    def draw(self, rng, n):
        return self.scale * rng.standard_gamma(self.shape, n)


@dataclass(frozen=True)
class ChiSquare(_Family):
    """Chi-square with ``k`` degrees of freedom, i.e. Gamma(k/2, 2)."""

    k: float = 1.0
    family = "chisquare"

    def __post_init__(self):
        if not self.k > 0:
            raise ConfigError("chi-square degrees of freedom must be positive")

    @property
    def _gamma(self):
        return Gamma(shape=self.k / 2.0, scale=2.0)

    def quantile(self, p):
        return self._gamma.quantile(p)

    def cdf(self, x):
        return self._gamma.cdf(x)

    def pdf(self, x):
        return self._gamma.pdf(x)

    def draw(self, rng, n):
        return self._gamma.draw(rng, n)


FAMILIES = {
    "lognormal": Lognormal,
    "exponential": Exponential,
    "pareto2": ParetoII,
    "gamma": Gamma,
    "chisquare": ChiSquare,
}
_ALIASES = {"ln": "lognormal", "lnorm": "lognormal", "exp": "exponential", "par": "pareto2",
            "pareto": "pareto2", "chi2": "chisquare"}


@dataclass(frozen=True)
class ZeroSpikeMixture:
    """``(1 - epsilon) F + epsilon * (point mass at 0)``."""

    base: _Family
    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("mixture epsilon must lie in (0, 1)")

    family = property(lambda self: self.base.family)

    def params_label(self):
        return self.base.params_label()

    def label(self):
        return f"{self.base.label()}+zeros({self.epsilon:g})"

    def to_dict(self):
        return {**self.base.to_dict(), "epsilon": self.epsilon}

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        inner = np.clip((p - self.epsilon) / (1.0 - self.epsilon), 1e-300, 1.0)
        return np.where(p > self.epsilon, self.base.quantile(inner), 0.0)

    def quantile_density(self, p):
        p = np.asarray(p, dtype=float)
        inner = np.clip((p - self.epsilon) / (1.0 - self.epsilon), 1e-300, 1.0)
        return np.where(p > self.epsilon, self.base.quantile_density(inner) / (1.0 - self.epsilon), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.epsilon + (1.0 - self.epsilon) * self.base.cdf(x), 0.0)

    def draw(self, rng, n):
        # base stream first: as epsilon -> 0 the draw matches the uncontaminated one
        x = self.base.draw(rng, n)
        x[rng.random(n) < self.epsilon] = 0.0
        return x


def parse_distribution(obj):
    """Build a distribution from a dict or a ``family:k=v,k=v`` string.

    An ``epsilon`` entry wraps the result in a :class:`ZeroSpikeMixture`.
    """
    if isinstance(obj, str):
        name, _, rest = obj.partition(":")
        d = {"family": name.strip()}
        for item in filter(None, (t.strip() for t in rest.split(","))):
            key, eq, value = item.partition("=")
            if not eq:
                raise ConfigError(f"bad distribution parameter {item!r}")
            d[key.strip()] = float(value)
        obj = d
    obj = dict(obj)
    name = str(obj.pop("family", "")).lower()
    name = _ALIASES.get(name, name)
    if name not in FAMILIES:
        raise ConfigError(f"unknown distribution family {name!r}")
    eps = obj.pop("epsilon", None)
    try:
        base = FAMILIES[name](**{k: float(v) for k, v in obj.items()})
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name}: {exc}") from None
    if eps is not None and float(eps) > 0:
        return ZeroSpikeMixture(base, float(eps))
    return base


def sample(spec, n, seed):
    """Draw ``n`` observations and return them as a sorted :class:`Sample`."""
    if n < 1:
        raise ValueError("n must be positive")
    return sort_sample(spec.draw(make_rng(seed), n), source=spec.label())


def true_quantile(spec, p):
    return float(spec.quantile(p))


def true_quantile_density(spec, p):
    return float(spec.quantile_density(p))


def true_ratio(spec, p, q):
    return true_quantile(spec, p) / true_quantile(spec, q)


def fit_gamma_mom(s: Sample):
    """Method-of-moments gamma fit, ``shape = mean^2/var``, ``scale = var/mean``.

    Uses the population (``n``-denominator) variance.
    """
    mean = float(np.mean(s.values))
    var = float(np.var(s.values))
    if not var > 0:
        raise DegenerateSample("sample variance is zero")
    if not mean > 0:
        raise DegenerateSample("sample mean must be positive for a gamma fit")
    return Gamma(shape=mean * mean / var, scale=var / mean)


__all__ = [
    "ChiSquare", "Exponential", "Gamma", "Lognormal", "ParetoII", "ZeroSpikeMixture",
    "fit_gamma_mom", "make_rng", "parse_distribution", "replication_rng", "sample",
    "true_quantile", "true_quantile_density", "true_ratio",
]
