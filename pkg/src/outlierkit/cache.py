"""Persistent table of simulated critical values.

The on-disk format is line-oriented UTF-8: a single header line carrying
the format version, then one entry per line with tab-separated fields

    method  family  estimator  n  s  alpha  side  value  replicates  seed  rng  created_at  tool_version

``n`` is either a positive integer or the literal ``asymptotic``.  Floats
are written with ``repr`` so a read back parses to the identical double.
Writes go through a temporary file and an atomic rename, so concurrent
writers leave the last complete table in place.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .errors import DataError

CACHE_FORMAT = "outlierkit-critical-values/1"

_N_ASYMPTOTIC = "asymptotic"


@dataclass(frozen=True)
class CacheKey:
    method: str
    family: str
    estimator: str
    n: int | None  # None encodes the asymptotic entry
    s: int
    alpha: float
    side: str


@dataclass(frozen=True)
class CacheEntry:
    value: float
    replicates: int
    seed: int
    rng_name: str
    created_at: str
    tool_version: str


class CriticalValueTable:
    """In-memory map of critical values keyed by their full context."""

    def __init__(self, entries: dict[CacheKey, CacheEntry] | None = None):
        self.entries: dict[CacheKey, CacheEntry] = dict(entries or {})

    def get(self, key: CacheKey) -> CacheEntry | None:
        return self.entries.get(key)

    def put(self, key: CacheKey, entry: CacheEntry) -> None:
        self.entries[key] = entry

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, CriticalValueTable) and self.entries == other.entries


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _format_n(n: int | None) -> str:
    return _N_ASYMPTOTIC if n is None else str(n)


def _parse_n(text: str, lineno: int) -> int | None:
    if text == _N_ASYMPTOTIC:
        return None
    try:
        return int(text)
    except ValueError:
        raise DataError(f"cache line {lineno}: bad sample size field {text!r}") from None


def cache_write(path: str | Path, table: CriticalValueTable) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [CACHE_FORMAT]
    for key in sorted(table.entries, key=lambda k: (k.method, k.family, k.estimator,
                                                    _format_n(k.n), k.s, repr(k.alpha), k.side)):
        e = table.entries[key]
        lines.append(
            "\t".join(
                [
                    key.method,
                    key.family,
                    key.estimator,
                    _format_n(key.n),
                    str(key.s),
                    repr(key.alpha),
                    key.side,
                    repr(e.value),
                    str(e.replicates),
                    str(e.seed),
                    e.rng_name,
                    e.created_at,
                    e.tool_version,
                ]
            )
        )
    payload = "\n".join(lines) + "\n"
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def cache_read(path: str | Path) -> CriticalValueTable:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise DataError(f"{path}: empty cache file")
    if lines[0] != CACHE_FORMAT:
        raise DataError(
            f"{path}: cache format {lines[0]!r} does not match {CACHE_FORMAT!r}; "
            "regenerate the cache with this version"
        )
    table = CriticalValueTable()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 13:
            raise DataError(f"cache line {lineno}: expected 13 fields, found {len(fields)}")
        try:
            key = CacheKey(
                method=fields[0],
                family=fields[1],
                estimator=fields[2],
                n=_parse_n(fields[3], lineno),
                s=int(fields[4]),
                alpha=float(fields[5]),
                side=fields[6],
            )
            entry = CacheEntry(
                value=float(fields[7]),
                replicates=int(fields[8]),
                seed=int(fields[9]),
                rng_name=fields[10],
                created_at=fields[11],
                tool_version=fields[12],
            )
        except ValueError as exc:
            raise DataError(f"cache line {lineno}: {exc}") from None
        table.put(key, entry)
    return table
