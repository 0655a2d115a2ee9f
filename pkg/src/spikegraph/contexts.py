"""
Counting of local pasts preceding the target neuron's spikes.

For target ``i`` and time ``t``, the gap since the last spike of ``i`` pins
the only admissible past length ``ell``: ``X_{t-ell-1}(i) = 1`` followed by
``ell`` zeros. The local past ``w`` is the ``ell x (|F| - 1)`` window of the
other sampled neurons at times ``t - ell .. t - 1``, flattened in
(time, neuron) row-major order.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .model import SpikeRaster


@dataclass(frozen=True, order=True)
class ContextKey:
    """Past length ``ell`` plus the window bits packed MSB-first with ``np.packbits``."""

    ell: int
    bits: bytes
    width: int  # number of other neurons, |F| - 1

    @classmethod
    def from_array(cls, window) -> "ContextKey":
        window = np.asarray(window, dtype=np.uint8)
        if window.ndim != 2:
            raise ValueError("window must be (ell, |F| - 1)")
        return cls(window.shape[0], np.packbits(window.ravel()).tobytes(), window.shape[1])

    @classmethod
    def from_string(cls, ell: int, s: str, width: int) -> "ContextKey":
        if len(s) != ell * width or set(s) - {"0", "1"}:
            raise ValueError(f"bit string {s!r} does not fit ell={ell}, width={width}")
        arr = np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")
        return cls.from_array(arr.reshape(ell, width))

    def to_array(self) -> np.ndarray:
        flat = np.unpackbits(np.frombuffer(self.bits, dtype=np.uint8), count=self.ell * self.width)
        return flat.reshape(self.ell, self.width)

    def to_string(self) -> str:
        return "".join("1" if b else "0" for b in self.to_array().ravel())

    def without_column(self, col: int) -> tuple[int, bytes]:
        """Group key with one neuron's column deleted."""
        arr = np.delete(self.to_array(), col, axis=1)
        return self.ell, np.packbits(arr.ravel()).tobytes()


@dataclass(frozen=True)
class ContextTable:
    """Counts ``(n0, n1)`` per observed local past for one target neuron."""

    target: int
    region: tuple[int, ...]
    n: int
    counts: dict[ContextKey, tuple[int, int]]

    @property
    def others(self) -> tuple[int, ...]:
        """Sampled neurons other than the target, in column order of the keys."""
        return tuple(k for k in self.region if k != self.target)

    def total(self, key: ContextKey) -> int:
        n0, n1 = self.counts.get(key, (0, 0))
        return n0 + n1

    def __len__(self):
        return len(self.counts)


def _eligible(col: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Times ``t`` (1-based) with an admissible past of length ``ell >= 1``, and those ``ell``."""
    times = np.arange(1, n + 1)
    spiked = np.where(col == 1, times, 0)
    last_upto = np.maximum.accumulate(spiked)  # last spike at or before t, 0 if none in sample
    # previous spike strictly before t, restricted to times 1..n
    prev = np.concatenate(([0], last_upto[:-1]))
    ell = times - prev - 1
    ok = (prev >= 1) & (ell >= 1)
    return times[ok], ell[ok]


def count_contexts(raster: SpikeRaster, i: int, ell_max: int | None = None) -> ContextTable:
    """Count ``N_(i,n)(w, a)`` for every observed local past ``w``.

    Every time step contributes to at most one key. Times are grouped by their
    past length so windows of equal shape are packed together; total work is
    proportional to the summed window sizes, ``O(n^2 |F|)`` in the worst case.

    Parameters
    ----------
    raster : SpikeRaster
        The sample over the region ``F``.
    i : int
        Target neuron id, must be a raster column.
    ell_max : int, optional
        Skip past lengths above this cap. Defaults to ``n - 2``.
    """
    n = raster.n
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    ci = raster.column(i)
    others = [c for c in range(len(raster.neurons)) if c != ci]
    width = len(others)
    target = raster.bits[:, ci]
    sub = raster.bits[:, others]
    times, ells = _eligible(target, n)
    cap = n - 2 if ell_max is None else min(ell_max, n - 2)
    keep = ells <= cap
    times, ells = times[keep], ells[keep]

    acc: dict[ContextKey, list[int]] = defaultdict(lambda: [0, 0])
    order = np.argsort(ells, kind="stable")
    times, ells = times[order], ells[order]
    bounds = np.flatnonzero(np.diff(ells)) + 1
    for ts, es in zip(np.split(times, bounds), np.split(ells, bounds)):
        if ts.size == 0:
            continue
        ell = int(es[0])
        # rows t-ell .. t-1 in 1-based time are indices t-ell-1 .. t-2
        idx = (ts - ell - 1)[:, None] + np.arange(ell)[None, :]
        windows = sub[idx].reshape(ts.size, ell * width)
        packed = np.packbits(windows, axis=1) if width else np.zeros((ts.size, 0), np.uint8)
        outcome = target[ts - 1]
        if ts.size == 1:
            # long gaps leave one time per length; unique() would dominate
            acc[ContextKey(ell, packed[0].tobytes(), width)][int(outcome[0])] += 1
            continue
        rows = np.concatenate([packed, outcome[:, None]], axis=1)
        uniq, counts = np.unique(rows, axis=0, return_counts=True)
        for row, c in zip(uniq, counts):
            key = ContextKey(ell, row[:-1].tobytes(), width)
            acc[key][int(row[-1])] += int(c)
    counts = {k: (v[0], v[1]) for k, v in sorted(acc.items())}
    return ContextTable(int(i), raster.neurons, n, counts)


def admissible_threshold(n: int, xi: float) -> float:
    return float(n) ** (0.5 + xi)


def admissible_set(table: ContextTable, xi: float) -> frozenset[ContextKey]:
    """Keys observed at least ``n^(1/2 + xi)`` times."""
    if not 0.0 < xi < 0.5:
        raise ValueError(f"xi must lie in (0, 1/2), got {xi}")
    threshold = admissible_threshold(table.n, xi)
    return frozenset(k for k, (n0, n1) in table.counts.items() if n0 + n1 >= threshold)


class UndefinedProbability(ValueError):
    pass


def empirical_prob(table: ContextTable, key: ContextKey) -> float:
    n0, n1 = table.counts.get(key, (0, 0))
    if n0 + n1 == 0:
        raise UndefinedProbability(f"context {key.ell}:{key.to_string()} was never observed")
    return n1 / (n0 + n1)


def count_contexts_naive(raster: SpikeRaster, i: int) -> dict[tuple[int, str], tuple[int, int]]:
    """Direct transcription of the counting definition, loop over ``(ell, t)``."""
    n = raster.n
    ci = raster.column(i)
    others = [c for c in range(len(raster.neurons)) if c != ci]
    X = raster.bits
    out: dict[tuple[int, str], list[int]] = {}
    for ell in range(1, n - 1):
        for t in range(ell + 2, n + 1):
            # X_{t-ell-1}^{t-1}(i) = 1 0^ell
            if X[t - ell - 2, ci] != 1:
                continue
            if any(X[t - s - 1, ci] != 0 for s in range(1, ell + 1)):
                continue
            w = "".join(str(int(X[s - 1, c])) for s in range(t - ell, t) for c in others)
            out.setdefault((ell, w), [0, 0])[int(X[t - 1, ci])] += 1
    return {k: (v[0], v[1]) for k, v in out.items()}


def table_as_strings(table: ContextTable) -> dict[tuple[int, str], tuple[int, int]]:
    return {(k.ell, k.to_string()): v for k, v in table.counts.items()}


def iter_rows(table: ContextTable) -> Iterable[tuple[int, str, int, int]]:
    for key, (n0, n1) in table.counts.items():
        yield key.ell, key.to_string(), n0, n1
