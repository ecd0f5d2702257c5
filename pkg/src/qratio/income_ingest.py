"""Binned income tables and reconstruction of unit-level samples from them."""
from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .distributions import make_rng, open_uniform
from .errors import InputError, NegativeCount, OverlappingBins, UnorderedBins
from .quantile_core import sort_sample

_META = re.compile(r"#\s*meta\s+(\w+)\s*:\s*(.*)")


@dataclass(frozen=True)
class Bin:
    lower: float
    upper: float
    count: float

    @property
    def is_point(self):
        return self.lower == self.upper


@dataclass(frozen=True)
class BinnedIncomeTable:
    """Counts (persons, in thousands) over half-open bins ``(lower, upper]``."""

    bins: tuple
    total: float
    household_sample_size: Optional[int] = None

    @property
    def counts(self):
        return np.array([b.count for b in self.bins])


@dataclass(frozen=True)
class ReconstructionPolicy:
    """Which bins to keep and how to spread values inside them.

    ``within_bin="stratified"`` splits a bin holding ``k`` values into ``k``
    equal cells and draws one uniform value per cell; ``"iid"`` draws ``k``
    independent uniforms over the whole bin. Both are uniform within the bin,
    but stratification removes almost all seed-to-seed noise in the quantiles.
    """

    truncate_to: tuple = (0.0, 2000.0)
    within_bin: str = "stratified"
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.truncate_to
        if not (lo >= 0 and hi > lo):
            raise InputError(f"bad truncation interval {self.truncate_to!r}")
        if self.within_bin not in ("stratified", "iid"):
            raise InputError(f"unsupported within-bin law {self.within_bin!r}")

    def keeps(self, b):
        lo, hi = self.truncate_to
        return not b.is_point and b.lower >= lo and b.upper <= hi


def _read_text(source):
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        return Path(source).read_text()
    return source


def shipped_table_path():
    return resources.files("qratio") / "data" / "ewi_2005_2011.csv"


def parse_table(source, count_column="count_thousands", total=None, household_sample_size=None):
    """Read a binned table from CSV text or a path.

    Required columns are ``lower``, ``upper`` and ``count_column``; ``upper``
    may be ``inf`` on the last row and a zero-income point mass is written
    ``0,0,count``. Comment lines (``#``) are ignored except for
    ``# meta <column>: total=... household_sample_size=...``, which supply
    defaults for ``total`` and ``household_sample_size``.

    Raises
    ------
    UnorderedBins, OverlappingBins, NegativeCount
        Naming the offending (1-based, data) row.
    """
    text = _read_text(source)
    meta = {}
    data_lines = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            m = _META.match(stripped)
            if m and m.group(1) == count_column:
                meta.update(kv.split("=", 1) for kv in m.group(2).replace(",", " ").split())
            continue
        data_lines.append(line)
    reader = csv.DictReader(io.StringIO("\n".join(data_lines)))
    fieldnames = [f.strip() for f in (reader.fieldnames or [])]
    for col in ("lower", "upper", count_column):
        if col not in fieldnames:
            raise InputError(f"missing column {col!r}; found {fieldnames}")
    bins = []
    for row_no, row in enumerate(reader, start=1):
        row = {k.strip(): (v or "").strip() for k, v in row.items()}
        try:
            b = Bin(float(row["lower"]), float(row["upper"]), float(row[count_column]))
        except ValueError as exc:
            raise InputError(f"row {row_no}: {exc}") from None
        if b.count < 0:
            raise NegativeCount(row_no, f"count {b.count} is negative")
        if b.upper < b.lower:
            raise UnorderedBins(row_no, f"upper {b.upper} below lower {b.lower}")
        if bins:
            prev = bins[-1]
            if b.lower < prev.lower or (b.lower == prev.lower and b.upper <= prev.upper):
                raise UnorderedBins(row_no, f"bin ({b.lower}, {b.upper}] out of order")
            if b.lower < prev.upper:
                raise OverlappingBins(row_no, f"bin ({b.lower}, {b.upper}] overlaps ({prev.lower}, {prev.upper}]")
        bins.append(b)
    if not bins:
        raise InputError("table has no rows")
    summed = sum(b.count for b in bins)
    if total is None:
        total = float(meta["total"]) if "total" in meta else summed
    # each count is rounded to 0.1 thousand
    if abs(total - summed) > 0.05 * len(bins) + 1e-9:
        raise InputError(f"stated total {total} disagrees with summed counts {summed:.1f}")
    if household_sample_size is None and "household_sample_size" in meta:
        household_sample_size = int(meta["household_sample_size"])
    return BinnedIncomeTable(tuple(bins), float(total), household_sample_size)


def load_shipped_table(year):
    """The 2005 or 2011 column of the shipped income table."""
    return parse_table(shipped_table_path().read_text(), count_column=f"count_{year}")


def excluded_mass(table, policy):
    return sum(b.count for b in table.bins if not policy.keeps(b))


def reconstruction_size(table, policy=ReconstructionPolicy()):
    """``household_sample_size * (1 - excluded / total)``, rounded to an integer."""
    if table.household_sample_size is None:
        raise InputError("table has no household sample size")
    frac = 1.0 - excluded_mass(table, policy) / table.total
    return int(math.floor(table.household_sample_size * frac + 0.5))


def allocate(counts, size):
    """Largest-remainder apportionment of ``size`` units proportional to ``counts``."""
    counts = np.asarray(counts, dtype=float)
    quotas = counts / counts.sum() * size
    base = np.floor(quotas).astype(int)
    short = size - int(base.sum())
    # stable sort: ties go to the earlier bin
    order = np.argsort(-(quotas - base), kind="stable")
    base[order[:short]] += 1
    return base


def reconstruct(table, policy=ReconstructionPolicy()):
    """Uniform-within-bin sample whose bin frequencies follow the table exactly."""
    kept = [b for b in table.bins if policy.keeps(b)]
    if not kept:
        raise InputError("no bins inside the truncation interval")
    size = reconstruction_size(table, policy)
    alloc = allocate([b.count for b in kept], size)
    rng = make_rng(policy.seed)
    parts = []
    for b, k in zip(kept, alloc):
        u = open_uniform(rng, int(k))
        if policy.within_bin == "stratified":
            u = (np.arange(k) + u) / k
        parts.append(b.lower + (b.upper - b.lower) * u)
    return sort_sample(np.concatenate(parts), source="reconstructed income table")
