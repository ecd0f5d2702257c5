"""Comparing quantile ratios from two independent samples on the log scale."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .quantile_density import DEFAULT_BANDWIDTH
from .ratio_inference import (
    DEFAULT_CONF,
    QuantilePair,
    critical_value,
    log_standard_error,
    estimate_ratio,
)


@dataclass(frozen=True)
class TwoSampleInference:
    theta_diff: float
    ratio_of_ratios: float
    se_diff: float
    z_stat: float
    interval_log: tuple
    interval_ratio: tuple
    reject: bool
    level: float
    rho_x: float
    rho_y: float
    se_log_x: float
    se_log_y: float

    def as_dict(self):
        return {
            "theta_diff": self.theta_diff,
            "ratio_of_ratios": self.ratio_of_ratios,
            "se_diff": self.se_diff,
            "z_stat": self.z_stat,
            "interval_log": list(self.interval_log),
            "interval_ratio": list(self.interval_ratio),
            "reject": self.reject,
            "level": self.level,
            "rho_x": self.rho_x,
            "rho_y": self.rho_y,
            "se_log_x": self.se_log_x,
            "se_log_y": self.se_log_y,
        }


def combine(theta_x, var_x, theta_y, var_y, conf=DEFAULT_CONF):
    """Interval and test for ``theta_x - theta_y`` from independent log-ratio estimates."""
    z = critical_value(conf)
    diff = theta_x - theta_y
    se = math.sqrt(var_x + var_y)
    lo, hi = diff - z * se, diff + z * se
    z_stat = diff / se
    return TwoSampleInference(
        theta_diff=diff,
        ratio_of_ratios=math.exp(diff),
        se_diff=se,
        z_stat=z_stat,
        interval_log=(lo, hi),
        interval_ratio=(math.exp(lo), math.exp(hi)),
        # |z_stat| >= z, phrased on the interval so the two can never disagree
        reject=not (lo < 0.0 < hi),
        level=round(1.0 - conf, 12),
        rho_x=math.exp(theta_x),
        rho_y=math.exp(theta_y),
        se_log_x=math.sqrt(var_x),
        se_log_y=math.sqrt(var_y),
    )


def compare_ratios(
    sx,
    sy,
    pq: QuantilePair,
    conf=DEFAULT_CONF,
    spec=DEFAULT_BANDWIDTH,
    pq_y: Optional[QuantilePair] = None,
):
    """Compare ``rho_x`` (from ``sx``) with ``rho_y`` (from ``sy``).

    ``pq_y`` defaults to ``pq``. The per-sample log-ratio variances are added
    without pooling. ``reject`` is true when ``|z_stat| >= z_{1-alpha/2}``,
    equivalently when 1 lies outside ``interval_ratio``.
    """
    pq_y = pq if pq_y is None else pq_y
    se_x = log_standard_error(sx, pq, spec)
    se_y = log_standard_error(sy, pq_y, spec)
    theta_x = math.log(estimate_ratio(sx, pq))
    theta_y = math.log(estimate_ratio(sy, pq_y))
    return combine(theta_x, se_x * se_x, theta_y, se_y * se_y, conf)
