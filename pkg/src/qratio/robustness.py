"""Influence functions, asymptotic variances and breakdown points of quantile ratios.

Everything here is a population functional: inputs are analytic
distributions, not samples.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distributions import make_rng, parse_distribution
from .ratio_inference import QuantilePair


@dataclass(frozen=True)
class AnalyticDistribution:
    name: str
    quantile: Callable
    quantile_density: Callable
    density: Callable
    sampler: Callable  # (n, seed) -> ndarray

    @classmethod
    def from_spec(cls, spec):
        if isinstance(spec, (str, dict)):
            spec = parse_distribution(spec)
        return cls(
            name=spec.label(),
            quantile=lambda p: float(spec.quantile(p)),
            quantile_density=lambda p: float(spec.quantile_density(p)),
            density=spec.pdf,
            sampler=lambda n, seed: spec.draw(make_rng(seed), n),
        )


@dataclass
class InfluenceReport:
    z_grid: np.ndarray
    if_values: np.ndarray
    relative: np.ndarray
    asv: float
    breakdown: float


def influence_quantile(dist, p, z):
    """``{p - I[x_p >= z]} g(p)``; the jump at ``z == x_p`` takes the indicator-on value."""
    xp = dist.quantile(p)
    ind = np.asarray(xp >= np.asarray(z, dtype=float), dtype=float)
    out = (p - ind) * dist.quantile_density(p)
    return float(out) if out.ndim == 0 else out


def influence_ratio(dist, pq, z):
    """Influence function of ``x_p / x_q`` at contamination point ``z``."""
    p, q = pq.p, pq.q
    xp, xq = dist.quantile(p), dist.quantile(q)
    return (xq * influence_quantile(dist, p, z) - xp * influence_quantile(dist, q, z)) / (xq * xq)


def asv_ratio(dist, pq):
    """Asymptotic variance of ``sqrt(n) (rho_hat - rho)``, i.e. ``E[IF^2]``."""
    pq.require_distinct()
    p, q = pq.p, pq.q
    xp, xq = dist.quantile(p), dist.quantile(q)
    gp, gq = dist.quantile_density(p), dist.quantile_density(q)
    return (
        p * (1 - p) * xq**2 * gp**2
        + q * (1 - q) * xp**2 * gq**2
        - 2 * xq * xp * pq.m * gp * gq
    ) / xq**4


def asv_symmetric_pair(dist, p):
    """Shortcut for the pair ``(p, 1 - p)``.

    With ``s = min(p, 1 - p)`` the covariance factor is ``s^2``, giving
    ``{p(1-p)(A^2 + B^2) - 2 s^2 A B} / x_{1-p}^4`` where ``A = x_{1-p} g(p)``
    and ``B = x_p g(1-p)``. At ``p = 1/2`` the ratio is identically 1 and the
    value is 0.
    """
    xp, xq = dist.quantile(p), dist.quantile(1 - p)
    a = xq * dist.quantile_density(p)
    b = xp * dist.quantile_density(1 - p)
    s = min(p, 1 - p)
    return (p * (1 - p) * (a * a + b * b) - 2 * s * s * a * b) / xq**4


def breakdown_point(pq):
    """``min{p, 1-p, q, 1-q, |p-q|}``; largest (1/3) at ``{p, q} = {1/3, 2/3}``."""
    pq.require_distinct()
    p, q = pq.p, pq.q
    return min(p, 1 - p, q, 1 - q, abs(p - q))


def influence_report(dist, pq, z_grid):
    z_grid = np.asarray(z_grid, dtype=float)
    values = np.array([influence_ratio(dist, pq, z) for z in z_grid])
    rho = dist.quantile(pq.p) / dist.quantile(pq.q)
    return InfluenceReport(
        z_grid=z_grid,
        if_values=values,
        relative=values / rho,
        asv=asv_ratio(dist, pq),
        breakdown=breakdown_point(pq),
    )


SURFACE_COLUMNS = ("p", "q", "z", "if_rel", "asv_rel", "breakdown")


def influence_surface(dist, p_grid, z_grid, q_grid=None):
    """Rows ``(p, q, z, IF/rho, ASV/rho^2, breakdown)`` for plotting.

    With ``q_grid=None`` each ``p`` is paired with ``q = 1 - p``; otherwise the
    full ``p x q`` product is used. Cells with ``p == q`` are skipped. Output
    order is ``p``, then ``q``, then ``z``, as given.
    """
    if q_grid is None:
        pairs = [(p, 1.0 - p) for p in p_grid]
    else:
        pairs = list(itertools.product(p_grid, q_grid))
    rows = []
    for p, q in pairs:
        if p == q:
            continue
        pq = QuantilePair(p, q)
        rho = dist.quantile(p) / dist.quantile(q)
        asv_rel = asv_ratio(dist, pq) / rho**2
        bd = breakdown_point(pq)
        for z in z_grid:
            rows.append((pq.p, pq.q, float(z), influence_ratio(dist, pq, z) / rho, asv_rel, bd))
    return rows
