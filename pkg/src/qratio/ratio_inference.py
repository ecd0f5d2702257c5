"""Point and interval estimation of a quantile ratio ``rho = x_p / x_q``.

The asymptotic variance of ``sqrt(n) * rho_hat`` is the quadratic

    h^2(rho) = a0 + a1 rho + a2 rho^2,
    a0 = p(1-p) g(p)^2 / x_q^2,  a1 = -2 m(p,q) g(p) g(q) / x_q^2,  a2 = q(1-q) g(q)^2 / x_q^2,

with ``m(p, q) = min(p, q) (1 - max(p, q))``. Plugging in Type-8 quantiles and
kernel quantile densities gives a distribution-free standard error and two
intervals: the studentized log interval and the variance-stabilized (asinh)
interval.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import (
    DegenerateDensity,
    DiscriminantViolation,
    EqualProbabilities,
    InvalidProbability,
    NonPositiveDenominator,
    NonPositiveRatio,
)
from .quantile_core import check_probability, hf8_from_sorted, hf8_quantile
from .quantile_density import DEFAULT_BANDWIDTH, density_from_sorted, quantile_density

DEFAULT_CONF = 0.95


@dataclass(frozen=True)
class QuantilePair:
    p: float
    q: float

    def __post_init__(self):
        object.__setattr__(self, "p", check_probability(self.p, "p"))
        object.__setattr__(self, "q", check_probability(self.q, "q"))

    @property
    def m(self):
        """First-order covariance factor ``min(p, q) * (1 - max(p, q))``."""
        return min(self.p, self.q) * (1.0 - max(self.p, self.q))

    def require_distinct(self):
        if self.p == self.q:
            raise EqualProbabilities(
                f"p == q == {self.p}: the ratio is identically 1, no interval to build"
            )

    def label(self):
        return f"{round(100 * self.p, 6):g}/{round(100 * self.q, 6):g}"


@dataclass(frozen=True)
class VarianceQuadratic:
    """Coefficients of ``h^2(rho) = a0 + a1 rho + a2 rho^2``."""

    a0: float
    a1: float
    a2: float

    @property
    def discriminant(self):
        return self.a1 * self.a1 - 4.0 * self.a0 * self.a2

    @property
    def D(self):
        return math.sqrt(4.0 * self.a0 * self.a2 - self.a1 * self.a1)

    def h2(self, rho):
        return self.a0 + self.a1 * rho + self.a2 * rho * rho

    def l(self, rho):  # noqa: E743 - derivative of h2
        return self.a1 + 2.0 * self.a2 * rho

    def check(self):
        if not (self.a0 > 0 and self.a2 > 0 and self.discriminant < 0):
            raise DiscriminantViolation(self.a0, self.a1, self.a2)
        return self


@dataclass(frozen=True)
class RatioInference:
    rho_hat: float
    se: float
    conf_level: float
    interval_vst: tuple
    interval_stud: tuple
    n: int
    pair: QuantilePair
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "p": self.pair.p,
            "q": self.pair.q,
            "n": self.n,
            "conf_level": self.conf_level,
            "rho_hat": self.rho_hat,
            "se": self.se,
            "se_log": self.diagnostics["se_log"],
            "interval_vst": list(self.interval_vst),
            "interval_stud": list(self.interval_stud),
            "diagnostics": {k: v for k, v in self.diagnostics.items() if k != "se_log"},
        }


def critical_value(conf):
    """Two-sided normal critical value ``z_{1 - alpha/2}`` for level ``conf``."""
    conf = float(conf)
    if not 0.0 <= conf < 1.0:
        raise InvalidProbability(f"confidence level {conf!r} must lie in [0, 1)")
    return float(ndtri(0.5 + 0.5 * conf))


# -- array-level formulas (shared by the per-sample API and the simulation batch path)

def quadratic_coefficients(p, q, xq, gp, gq):
    m = min(p, q) * (1.0 - max(p, q))
    xq2 = xq * xq
    a0 = p * (1.0 - p) * gp * gp / xq2
    a1 = -2.0 * m * gp * gq / xq2
    a2 = q * (1.0 - q) * gq * gq / xq2
    return a0, a1, a2


def log_ratio_nvar(p, q, xp, xq, gp, gq):
    """``n * Var(ln rho_hat)`` in plug-in form."""
    m = min(p, q) * (1.0 - max(p, q))
    return (
        p * (1.0 - p) * gp * gp / (xp * xp)
        + q * (1.0 - q) * gq * gq / (xq * xq)
        - 2.0 * m * gp * gq / (xp * xq)
    )


def vst_bounds(a0, a1, a2, rho, z, n):
    d = np.sqrt(4.0 * a0 * a2 - a1 * a1)
    l = a1 + 2.0 * a2 * rho
    centre = np.arcsinh(l / d)
    c = z * np.sqrt(a2 / n)
    lower = (d * np.sinh(centre - c) - a1) / (2.0 * a2)
    upper = (d * np.sinh(centre + c) - a1) / (2.0 * a2)
    return lower, upper


def stud_bounds(rho, nvar_log, z, n):
    half = z * np.sqrt(nvar_log / n)
    return rho * np.exp(-half), rho * np.exp(half)


# -- per-sample API

def estimate_ratio(s, pq):
    """``x_p_hat / x_q_hat`` from Type-8 quantiles; exactly 1 when ``p == q``."""
    if pq.p == pq.q:
        return 1.0
    xq = hf8_quantile(s, pq.q)
    if not xq > 0.0:
        raise NonPositiveDenominator(pq.q, xq)
    return hf8_quantile(s, pq.p) / xq


def asymptotic_correlation(pq):
    """Limit correlation of ``(x_p_hat, x_q_hat)``, free of the distribution."""
    pq.require_distinct()
    lo, hi = sorted((pq.p, pq.q))
    return math.sqrt(lo * (1.0 - hi) / (hi * (1.0 - lo)))


@dataclass(frozen=True)
class _Plugins:
    xp: float
    xq: float
    gp: float
    gq: float
    bp: float
    bq: float
    rho: float

    def quadratic(self, pq):
        return VarianceQuadratic(*quadratic_coefficients(pq.p, pq.q, self.xq, self.gp, self.gq))


def _plugins(s, pq, spec):
    pq.require_distinct()
    rho = estimate_ratio(s, pq)
    xq = hf8_quantile(s, pq.q)
    xp = hf8_quantile(s, pq.p)
    dp = quantile_density(s, pq.p, spec)
    dq = quantile_density(s, pq.q, spec)
    return _Plugins(xp, xq, dp.g_hat, dq.g_hat, dp.bandwidth_used, dq.bandwidth_used, rho)


def _positive_ratio(pl, pq):
    if not pl.rho > 0.0:
        raise NonPositiveRatio(f"estimated ratio for {pq.label()} is {pl.rho!r}")


def variance_quadratic(s, pq, spec=DEFAULT_BANDWIDTH):
    """Plug-in ``VarianceQuadratic``; raises ``DiscriminantViolation`` if not positive definite."""
    return _plugins(s, pq, spec).quadratic(pq).check()


def standard_error(s, pq, spec=DEFAULT_BANDWIDTH):
    """Distribution-free ``SE(rho_hat) = h_hat(rho_hat) / sqrt(n)``."""
    pl = _plugins(s, pq, spec)
    quad = pl.quadratic(pq).check()
    return math.sqrt(quad.h2(pl.rho) / s.n)


def log_standard_error(s, pq, spec=DEFAULT_BANDWIDTH):
    """Standard error of ``ln rho_hat``."""
    pl = _plugins(s, pq, spec)
    _positive_ratio(pl, pq)
    return math.sqrt(log_ratio_nvar(pq.p, pq.q, pl.xp, pl.xq, pl.gp, pl.gq) / s.n)


def studentized_interval(s, pq, conf=DEFAULT_CONF, spec=DEFAULT_BANDWIDTH):
    """Exponentiated Wald interval for ``ln rho``; ``lower * upper == rho_hat**2``."""
    pl = _plugins(s, pq, spec)
    _positive_ratio(pl, pq)
    z = critical_value(conf)
    nvar = log_ratio_nvar(pq.p, pq.q, pl.xp, pl.xq, pl.gp, pl.gq)
    lo, hi = stud_bounds(pl.rho, nvar, z, s.n)
    return float(lo), float(hi)


def vst_interval(s, pq, conf=DEFAULT_CONF, spec=DEFAULT_BANDWIDTH):
    """Variance-stabilized interval.

    ``[D sinh(asinh(l(rho)/D) -/+ z sqrt(a2/n)) - a1] / (2 a2)`` with
    ``D = sqrt(4 a0 a2 - a1^2)`` and ``l(rho) = a1 + 2 a2 rho``.
    """
    pl = _plugins(s, pq, spec)
    _positive_ratio(pl, pq)
    quad = pl.quadratic(pq).check()
    z = critical_value(conf)
    lo, hi = vst_bounds(quad.a0, quad.a1, quad.a2, pl.rho, z, s.n)
    return float(lo), float(hi)


def log_ratio_bias(s, pq, spec=DEFAULT_BANDWIDTH):
    """First-order bias of ``ln rho_hat``: ``(s_q^2/x_q^2 - s_p^2/x_p^2) / (2n)``."""
    pl = _plugins(s, pq, spec)
    _positive_ratio(pl, pq)
    return bias_from_plugins(pq, pl.xp, pl.xq, pl.gp, pl.gq, s.n)


def bias_from_plugins(pq, xp, xq, gp, gq, n):
    sp2 = pq.p * (1.0 - pq.p) * gp * gp
    sq2 = pq.q * (1.0 - pq.q) * gq * gq
    return (sq2 / (xq * xq) - sp2 / (xp * xp)) / (2.0 * n)


def interval_width(interval):
    lo, hi = interval
    return hi - lo


def asymptotic_width(pq, rho, quad, n, conf=DEFAULT_CONF):
    """Leading-order width ``2 z h(rho) / sqrt(n)`` shared by both intervals."""
    return 2.0 * critical_value(conf) * math.sqrt(quad.h2(rho)) / math.sqrt(n)


def infer_ratio(s, pq, conf=DEFAULT_CONF, spec=DEFAULT_BANDWIDTH):
    """Full report: estimate, SE, both intervals and the plug-in diagnostics."""
    pl = _plugins(s, pq, spec)
    _positive_ratio(pl, pq)
    quad = pl.quadratic(pq).check()
    z = critical_value(conf)
    n = s.n
    vst = tuple(float(v) for v in vst_bounds(quad.a0, quad.a1, quad.a2, pl.rho, z, n))
    nvar = log_ratio_nvar(pq.p, pq.q, pl.xp, pl.xq, pl.gp, pl.gq)
    stud = tuple(float(v) for v in stud_bounds(pl.rho, nvar, z, n))
    if conf > 0 and not (vst[0] < pl.rho < vst[1] and stud[0] < pl.rho < stud[1]):
        warnings.warn(f"interval does not strictly contain rho_hat={pl.rho} (n={n})")
    diagnostics = {
        "x_p": pl.xp,
        "x_q": pl.xq,
        "g_p": pl.gp,
        "g_q": pl.gq,
        "bandwidth_p": pl.bp,
        "bandwidth_q": pl.bq,
        "a0": quad.a0,
        "a1": quad.a1,
        "a2": quad.a2,
        "se_log": math.sqrt(nvar / n),
    }
    return RatioInference(
        rho_hat=pl.rho,
        se=math.sqrt(quad.h2(pl.rho) / n),
        conf_level=conf,
        interval_vst=vst,
        interval_stud=stud,
        n=n,
        pair=pq,
        diagnostics=diagnostics,
    )


# -- batch path for simulations

OK = 0
NONPOSITIVE_DENOMINATOR = 1
DEGENERATE_DENSITY = 2
DISCRIMINANT = 3
NONPOSITIVE_RATIO = 4

STATUS_NAMES = {
    NONPOSITIVE_DENOMINATOR: "nonpositive_denominator",
    DEGENERATE_DENSITY: "degenerate_density",
    DISCRIMINANT: "discriminant_violation",
    NONPOSITIVE_RATIO: "nonpositive_ratio",
}


@dataclass
class BatchPlugins:
    """Type-8 quantiles and kernel densities for a batch of sorted samples.

    ``x`` has one sorted sample per row; quantiles and densities are computed
    once per probability and reused by every pair that needs them.
    """

    n: int
    probs: tuple
    xhat: np.ndarray
    ghat: np.ndarray
    bandwidths: dict

    @classmethod
    def compute(cls, x, probs, spec=DEFAULT_BANDWIDTH):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[1]
        probs = tuple(sorted(set(float(p) for p in probs)))
        xhat = hf8_from_sorted(x, np.array(probs))
        bws = {p: spec.bandwidth(p, n) for p in probs}
        ghat = np.column_stack([density_from_sorted(x, p, bws[p]) for p in probs])
        return cls(n, probs, xhat, ghat, bws)

    def column(self, p):
        return self.probs.index(p)

    def pair_terms(self, pq):
        """``(rho, xp, xq, gp, gq, status)`` arrays for one pair, status 0 when usable."""
        i, j = self.column(pq.p), self.column(pq.q)
        xp, xq = self.xhat[:, i], self.xhat[:, j]
        gp, gq = self.ghat[:, i], self.ghat[:, j]
        status = np.zeros(xp.shape, dtype=np.int8)
        with np.errstate(divide="ignore", invalid="ignore"):
            rho = xp / xq
        status[~(rho > 0)] = NONPOSITIVE_RATIO
        status[~((gp > 0) & (gq > 0))] = DEGENERATE_DENSITY
        status[~(xq > 0)] = NONPOSITIVE_DENOMINATOR
        return rho, xp, xq, gp, gq, status


def batch_intervals(plugins, pq, conf=DEFAULT_CONF):
    """Both intervals for every row of a :class:`BatchPlugins`.

    Returns a dict with ``rho``, ``vst`` and ``stud`` (each an ``(lower, upper)``
    pair of arrays, NaN where unusable), and per-method status codes.
    """
    pq.require_distinct()
    z = critical_value(conf)
    n = plugins.n
    rho, xp, xq, gp, gq, status = plugins.pair_terms(pq)
    ok = status == OK
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        a0, a1, a2 = quadratic_coefficients(pq.p, pq.q, xq, gp, gq)
        disc_ok = (a0 > 0) & (a2 > 0) & (a1 * a1 - 4.0 * a0 * a2 < 0)
        status_vst = status.copy()
        status_vst[ok & ~disc_ok] = DISCRIMINANT
        vst_lo, vst_hi = vst_bounds(a0, a1, a2, rho, z, n)
        nvar = log_ratio_nvar(pq.p, pq.q, xp, xq, gp, gq)
        status_stud = status.copy()
        status_stud[ok & ~(nvar >= 0)] = DISCRIMINANT
        stud_lo, stud_hi = stud_bounds(rho, nvar, z, n)
    bad_v = status_vst != OK
    bad_s = status_stud != OK
    vst_lo[bad_v] = np.nan
    vst_hi[bad_v] = np.nan
    stud_lo[bad_s] = np.nan
    stud_hi[bad_s] = np.nan
    return {
        "rho": rho,
        "vst": (vst_lo, vst_hi),
        "stud": (stud_lo, stud_hi),
        "status_vst": status_vst,
        "status_stud": status_stud,
    }
