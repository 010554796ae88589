import pytest

from outlierkit.cache import (
    CACHE_FORMAT,
    CacheEntry,
    CacheKey,
    CriticalValueTable,
    cache_read,
    cache_write,
)
from outlierkit.errors import DataError


def entry(value):
    return CacheEntry(
        value=value,
        replicates=100_000,
        seed=7,
        rng_name="philox4x64",
        created_at="2026-08-08T00:00:00Z",
        tool_version="0.1.0",
    )


def key(**overrides):
    base = dict(method="bp", family="normal", estimator="med_qn", n=None, s=5, alpha=0.05, side="two")
    base.update(overrides)
    return CacheKey(**base)


def test_empty_round_trip(tmp_path):
    path = tmp_path / "cache.tsv"
    cache_write(path, CriticalValueTable())
    assert cache_read(path) == CriticalValueTable()


def test_round_trip_is_bit_exact(tmp_path):
    path = tmp_path / "cache.tsv"
    table = CriticalValueTable()
    awkward = 0.985299999999999987  # shortest repr must survive the trip
    table.put(key(), entry(awkward))
    table.put(key(method="dg", n=50, alpha=0.025, side="right", s=0), entry(3.1234567890123456))
    cache_write(path, table)
    back = cache_read(path)
    assert back == table
    assert back.get(key()).value == awkward


def test_version_mismatch(tmp_path):
    path = tmp_path / "cache.tsv"
    path.write_text("outlierkit-critical-values/0\n")
    with pytest.raises(DataError, match="format"):
        cache_read(path)


def test_malformed_line_reports_number(tmp_path):
    path = tmp_path / "cache.tsv"
    path.write_text(CACHE_FORMAT + "\nbp\tnormal\tbroken\n")
    with pytest.raises(DataError, match="line 2"):
        cache_read(path)


def test_bad_numeric_field_reports_number(tmp_path):
    path = tmp_path / "cache.tsv"
    good = "\t".join(
        ["bp", "normal", "med_qn", "asymptotic", "5", "0.05", "two",
         "not-a-float", "100000", "7", "philox4x64", "now", "0.1.0"]
    )
    path.write_text(CACHE_FORMAT + "\n" + good + "\n")
    with pytest.raises(DataError, match="line 2"):
        cache_read(path)


def test_atomic_overwrite(tmp_path):
    path = tmp_path / "cache.tsv"
    t1 = CriticalValueTable()
    t1.put(key(), entry(0.9853))
    cache_write(path, t1)
    t2 = CriticalValueTable()
    t2.put(key(alpha=0.01), entry(0.9975))
    cache_write(path, t2)
    assert cache_read(path) == t2


def test_asymptotic_and_finite_keys_are_distinct(tmp_path):
    table = CriticalValueTable()
    table.put(key(n=None), entry(0.98))
    table.put(key(n=100), entry(0.97))
    path = tmp_path / "cache.tsv"
    cache_write(path, table)
    back = cache_read(path)
    assert back.get(key(n=None)).value == 0.98
    assert back.get(key(n=100)).value == 0.97
