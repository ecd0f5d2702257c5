"""Sorted samples and the Hyndman-Fan Type-8 quantile estimator."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, InvalidProbability, NonFiniteValue

# Same tolerance R's quantile() uses when flooring the plotting position.
_FUZZ = 4.0 * np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class Sample:
    """Immutable, sorted, finite observations.

    Build through :func:`sort_sample` (or :meth:`from_sorted` when the values
    are already known to be valid and ordered).
    """

    values: np.ndarray
    source: str = field(default="")

    def __post_init__(self):
        self.values.setflags(write=False)

    @classmethod
    def from_sorted(cls, values, source=""):
        arr = np.array(values, dtype=float)
        return cls(arr, source)

    @property
    def n(self):
        return self.values.shape[0]

    def __len__(self):
        return self.n

    def scaled(self, c, shift=0.0):
        """Return the sample ``c * values + shift`` (``c > 0`` keeps the order)."""
        if c <= 0:
            raise ValueError("scale factor must be positive")
        return Sample.from_sorted(c * self.values + shift, self.source)


def sort_sample(raw, source=""):
    """Validate and sort raw observations.

    Raises
    ------
    EmptyInput
        If ``raw`` has no elements.
    NonFiniteValue
        On the first NaN or infinite entry; the exception carries its index.
    """
    arr = np.asarray(raw, dtype=float).ravel()
    if arr.size == 0:
        raise EmptyInput("sample is empty")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        i = int(bad[0])
        raise NonFiniteValue(i, float(arr[i]))
    return Sample(np.sort(arr, kind="stable"), source)


def check_probability(p, name="p"):
    p = float(p)
    if not 0.0 < p < 1.0:
        raise InvalidProbability(f"{name}={p!r} must lie strictly inside (0, 1)")
    return p


def hf8_position(n, p):
    """Order-statistic index and interpolation weight of the Type-8 estimator.

    Returns 0-based index ``j`` and fraction ``h`` such that the estimate is
    ``x[j] + h * (x[j + 1] - x[j])`` on the sorted array ``x``. Positions
    outside ``[1, n]`` are clamped to the extreme order statistics, in which
    case ``h == 0`` and ``j + 1`` is never read past the end.
    """
    p = np.asarray(p, dtype=float)
    pos = (n + 1.0 / 3.0) * p + 1.0 / 3.0
    j = np.floor(pos + _FUZZ)
    h = pos - j
    h = np.where(np.abs(h) < _FUZZ, 0.0, h)
    low = j < 1
    high = j >= n
    h = np.where(low | high, 0.0, h)
    j = np.clip(j, 1, n).astype(np.intp)
    return j - 1, h


def hf8_from_sorted(x, p):
    """Type-8 quantiles of sorted data ``x`` along its last axis.

    ``x`` may be a 1-D sample or a 2-D batch with one sorted sample per row;
    ``p`` may be scalar or 1-D. Output shape is ``x.shape[:-1] + p.shape``.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    j, h = hf8_position(n, p)
    j1 = np.minimum(j + 1, n - 1)
    lo = x[..., j]
    hi = x[..., j1]
    return lo + h * (hi - lo)


def hf8_quantile(s, p):
    """Hyndman-Fan Type-8 estimate of the ``p``-th quantile of ``s``.

    Uses the plotting position ``(n + 1/3) p + 1/3``, i.e. the estimator R
    computes with ``quantile(x, p, type = 8)``.

    >>> hf8_quantile(sort_sample([1, 2, 3, 4, 5]), 0.5)
    3.0
    """
    p = check_probability(p)
    return float(hf8_from_sorted(s.values, p))


def empirical_cdf(s, x):
    """Fraction of observations ``<= x``."""
    return np.searchsorted(s.values, x, side="right") / s.n
