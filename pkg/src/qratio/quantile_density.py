"""Kernel estimation of the quantile density ``g(p) = 1 / f(x_p)``.

The estimator is a weighted sum of order statistics,

    g_hat(p) = sum_i X_(i) * {k_b(p - (i-1)/n) - k_b(p - i/n)},   k_b(u) = k(u/b)/b,

with the Epanechnikov kernel ``k`` and a bandwidth ``b`` that is optimal when
the data are lognormal (the quantile optimality ratio, QOR, of LN(0, 1)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtri

from .errors import DegenerateDensity, InputError, InvalidProbability, NonPositiveQRatio
from .quantile_core import check_probability

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class BandwidthSpec:
    """How to choose the kernel bandwidth.

    ``boundary_correct`` caps the bandwidth at ``p`` (lower boundary only);
    ``upper_clamp`` additionally caps it at ``1 - p``.
    ``override`` bypasses the QOR rule and clamping altogether.
    """

    method: str = "lognormal_qor"
    boundary_correct: bool = True
    override: Optional[float] = None
    upper_clamp: bool = False

    def __post_init__(self):
        if self.method != "lognormal_qor":
            raise ValueError(f"unknown bandwidth method {self.method!r}")
        if self.override is not None and not 0.0 < self.override < 1.0:
            raise InvalidProbability(f"bandwidth override {self.override!r} must lie in (0, 1)")

    def bandwidth(self, p, n):
        if self.override is not None:
            return float(self.override)
        return lognormal_qor_bandwidth(
            p, n, boundary_correct=self.boundary_correct, upper_clamp=self.upper_clamp
        )


DEFAULT_BANDWIDTH = BandwidthSpec()


@dataclass(frozen=True)
class QuantileDensityEstimate:
    p: float
    g_hat: float
    bandwidth_used: float


def epanechnikov(u):
    """``3 (1 - u^2) / 4`` on ``|u| <= 1``, zero elsewhere."""
    u = np.asarray(u, dtype=float)
    out = np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)
    return float(out) if out.ndim == 0 else out


def lognormal_qratio(p):
    """``q(p) / q''(p)`` for the LN(0, 1) quantile function ``q``."""
    u = float(ndtri(p))
    q_phi = _SQRT_2PI * math.exp(0.5 * u * u)
    q_phi1 = u * q_phi ** 2
    q_phi2 = q_phi ** 3 * (1.0 + 2.0 * u * u)
    big_q = math.exp(u)
    q_ln = big_q * q_phi
    q_ln1 = q_ln * q_phi + big_q * q_phi1
    q_ln2 = q_ln1 * q_phi + 2.0 * q_ln * q_phi1 + big_q * q_phi2
    return q_ln / q_ln2


def lognormal_qor_bandwidth(p, n, boundary_correct=True, upper_clamp=False):
    """Asymptotically optimal Epanechnikov bandwidth under a lognormal QOR.

    ``b = 15^(1/5) * qratio^(2/5) * n^(-1/5)``, then ``min(p, b)`` when
    ``boundary_correct`` and ``min(1 - p, b)`` when ``upper_clamp``.
    """
    p = check_probability(p)
    if n < 2:
        raise InputError("bandwidth needs n >= 2")
    qratio = lognormal_qratio(p)
    if not qratio > 0.0:
        raise NonPositiveQRatio(f"QOR at p={p} is {qratio!r}")
    b = 15.0 ** 0.2 * qratio ** 0.4 / n ** 0.2
    if boundary_correct:
        b = min(p, b)
    if upper_clamp:
        b = min(1.0 - p, b)
    return b


def kernel_weights(n, p, b):
    """Non-zero order-statistic weights of the estimator.

    Returns ``(start, w)`` such that ``g_hat = x[start:start + len(w)] @ w``
    for sorted ``x`` (0-based). Weights outside the window ``[p - b, p + b]``
    are exactly zero, so skipping them does not change the estimate.
    """
    lo = max(1, math.floor(n * (p - b)))
    hi = min(n, math.ceil(n * (p + b)) + 1)
    j = np.arange(lo - 1, hi + 1)
    k = epanechnikov((p - j / n) / b)
    w = (k[:-1] - k[1:]) / b
    return lo - 1, w


def density_from_sorted(x, p, b):
    """Kernel sum over the last axis of sorted data ``x`` (1-D or a 2-D batch).

    Sums smaller than the rounding-error bound of the dot product are
    returned as exactly zero, so locally constant data reads as degenerate.
    """
    x = np.asarray(x, dtype=float)
    start, w = kernel_weights(x.shape[-1], p, b)
    window = x[..., start:start + w.shape[0]]
    g = window @ w
    bound = w.shape[0] * np.finfo(float).eps * (np.abs(window) @ np.abs(w))
    return np.where(np.abs(g) <= bound, 0.0, g)


def quantile_density(s, p, spec=DEFAULT_BANDWIDTH):
    """Estimate ``g(p)`` from a sorted sample.

    Raises
    ------
    DegenerateDensity
        When the kernel sum is not strictly positive, e.g. for constant data.
    """
    p = check_probability(p)
    if s.n < 2:
        raise InputError("quantile density needs n >= 2")
    b = spec.bandwidth(p, s.n)
    g = float(density_from_sorted(s.values, p, b))
    if not g > 0.0:
        raise DegenerateDensity(p, g)
    return QuantileDensityEstimate(p=p, g_hat=g, bandwidth_used=b)
