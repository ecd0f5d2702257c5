import numpy as np
import pytest

from qratio.errors import InputError, NegativeCount, OverlappingBins, UnorderedBins
from qratio.income_ingest import (
    Bin,
    BinnedIncomeTable,
    ReconstructionPolicy,
    allocate,
    excluded_mass,
    load_shipped_table,
    parse_table,
    reconstruct,
    reconstruction_size,
)
from qratio.quantile_core import hf8_quantile
from qratio.ratio_inference import QuantilePair, estimate_ratio

PQ = QuantilePair(0.9, 0.1)


def test_shipped_tables():
    t05, t11 = load_shipped_table(2005), load_shipped_table(2011)
    assert t05.total == 19930.7 and t05.household_sample_size == 9961
    assert t11.total == 22189.0 and t11.household_sample_size == 14569
    assert sum(b.count for b in t05.bins) == pytest.approx(19930.7, abs=0.05 * len(t05.bins))
    assert t05.bins[0].is_point and t05.bins[-1].upper == np.inf
    assert excluded_mass(t05, ReconstructionPolicy()) == pytest.approx(73.7 + 506.2)


def test_reconstruction_sizes():
    assert reconstruction_size(load_shipped_table(2005)) == 9671
    assert reconstruction_size(load_shipped_table(2011)) == 13904


def test_no_excluded_mass_keeps_size():
    t = parse_table("lower,upper,count_thousands\n0,100,10\n100,200,30\n", household_sample_size=77)
    assert reconstruction_size(t) == 77


def test_single_bin_reconstruction():
    t = parse_table("lower,upper,count_thousands\n100,200,10\n", household_sample_size=500)
    s = reconstruct(t, ReconstructionPolicy(seed=3))
    assert s.n == 500
    assert np.all((s.values > 100) & (s.values <= 200))


@pytest.mark.parametrize("rows,err,row", [
    ("0,100,5\n50,150,5", OverlappingBins, 2),
    ("100,200,5\n0,100,5", UnorderedBins, 2),
    ("0,100,5\n100,200,-1", NegativeCount, 2),
    ("200,100,5", UnorderedBins, 1),
])
def test_validation_names_the_row(rows, err, row):
    with pytest.raises(err) as info:
        parse_table("lower,upper,count_thousands\n" + rows + "\n")
    assert info.value.row == row


def test_parse_errors():
    with pytest.raises(InputError):
        parse_table("lower,upper,n\n0,100,5\n")
    with pytest.raises(InputError):
        parse_table("lower,upper,count_thousands\n0,100,5\n", total=9.0)
    with pytest.raises(InputError):
        parse_table("lower,upper,count_thousands\n0,abc,5\n")
    with pytest.raises(InputError):
        reconstruction_size(parse_table("lower,upper,count_thousands\n0,100,5\n"))


def test_allocate_largest_remainder():
    alloc = allocate([1.0, 1.0, 1.0], 10)
    assert list(alloc) == [4, 3, 3]
    counts = np.array([b.count for b in load_shipped_table(2005).bins[1:-1]])
    alloc = allocate(counts, 9671)
    assert alloc.sum() == 9671
    assert np.all(np.abs(alloc - counts / counts.sum() * 9671) < 1)


@pytest.mark.parametrize("mode", ["stratified", "iid"])
def test_reconstruction_respects_bins(mode):
    t = load_shipped_table(2011)
    policy = ReconstructionPolicy(seed=4, within_bin=mode)
    s = reconstruct(t, policy)
    kept = [b for b in t.bins if policy.keeps(b)]
    alloc = allocate([b.count for b in kept], reconstruction_size(t, policy))
    assert s.n == 13904 == alloc.sum()
    for b, k in zip(kept, alloc):
        inside = (s.values > b.lower) & (s.values <= b.upper)
        assert inside.sum() == k
    assert s.values.min() > 0 and s.values.max() <= 2000


def test_reconstruction_deterministic():
    t = load_shipped_table(2005)
    a = reconstruct(t, ReconstructionPolicy(seed=12))
    b = reconstruct(t, ReconstructionPolicy(seed=12))
    c = reconstruct(t, ReconstructionPolicy(seed=13))
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_reconstructed_ratios_across_seeds():
    for year, target in ((2005, 3.888), (2011, 3.766)):
        t = load_shipped_table(year)
        for seed in range(5):
            assert estimate_ratio(reconstruct(t, ReconstructionPolicy(seed=seed)), PQ) == pytest.approx(target, abs=0.05)


def test_truncation_policy():
    with pytest.raises(InputError):
        ReconstructionPolicy(truncate_to=(100, 50))
    with pytest.raises(InputError):
        ReconstructionPolicy(within_bin="triangular")
    t = BinnedIncomeTable((Bin(0, 100, 5.0), Bin(100, 200, 5.0)), 10.0, 1000)
    policy = ReconstructionPolicy(truncate_to=(0, 100))
    assert reconstruction_size(t, policy) == 500
    assert hf8_quantile(reconstruct(t, policy), 0.99) <= 100
