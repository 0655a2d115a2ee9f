"""Sensitivity statistic and thresholded neighborhood selection."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .contexts import (
    ContextKey,
    ContextTable,
    admissible_set,
    count_contexts,
    empirical_prob,
)
from .model import SpikeRaster

DEFAULT_XI = 0.25
DEFAULT_C = 1.0


@dataclass(frozen=True)
class SensitivityProfile:
    target: int
    n: int
    xi: float
    delta: dict[int, float]
    witness: dict[int, tuple[ContextKey, ContextKey] | None] = field(default_factory=dict)


@dataclass(frozen=True)
class Edge:
    source: int
    target: int
    delta: float
    epsilon: float
    selected: bool


@dataclass(frozen=True)
class EstimatedGraph:
    region: tuple[int, ...]
    edges: tuple[Edge, ...]  # every ordered candidate pair, selected or not

    @property
    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset((e.source, e.target) for e in self.edges if e.selected)

    def neighborhood(self, i: int) -> frozenset[int]:
        return frozenset(e.source for e in self.edges if e.selected and e.target == i)


def sensitivity(
    table: ContextTable, admissible: Iterable[ContextKey], j: int
) -> tuple[float, tuple[ContextKey, ContextKey] | None]:
    """Largest change of the empirical spike probability across admissible
    pasts of equal length that differ only in neuron ``j``.

    Returns ``(0.0, None)`` when no such pair exists. Ties between witness
    pairs go to the lexicographically smallest ``(w, v)``.
    """
    if j == table.target or j not in table.region:
        raise ValueError(f"candidate {j} must be a sampled neuron other than the target {table.target}")
    col = table.others.index(j)
    groups: dict[tuple[int, bytes], list[ContextKey]] = defaultdict(list)
    for key in admissible:
        groups[key.without_column(col)].append(key)
    best, witness = 0.0, None
    for members in groups.values():
        if len(members) < 2:
            continue
        probs = {k: empirical_prob(table, k) for k in members}
        lo_p, hi_p = min(probs.values()), max(probs.values())
        d = hi_p - lo_p
        if witness is not None and d < best:
            continue
        lows = [k for k, p in probs.items() if p == lo_p]
        highs = [k for k, p in probs.items() if p == hi_p]
        cand = min(tuple(sorted((a, b))) for a in lows for b in highs if a != b)
        if witness is None or d > best or cand < witness:
            best, witness = d, cand
    return best, witness


def sensitivity_naive(table: ContextTable, admissible: Iterable[ContextKey], j: int) -> float:
    """Double loop over admissible pairs, straight from the definition."""
    col = table.others.index(j)
    keys = list(admissible)
    best = 0.0
    for w in keys:
        for v in keys:
            if w.ell != v.ell:
                continue
            if w.without_column(col) != v.without_column(col):
                continue
            best = max(best, abs(empirical_prob(table, w) - empirical_prob(table, v)))
    return best


def sensitivity_profile(table: ContextTable, xi: float) -> SensitivityProfile:
    T = admissible_set(table, xi)
    delta, witness = {}, {}
    for j in table.others:
        delta[j], witness[j] = sensitivity(table, T, j)
    return SensitivityProfile(table.target, table.n, xi, delta, witness)


def select_neighborhood(profile: SensitivityProfile, eps: float) -> frozenset[int]:
    if not eps > 0:
        raise ValueError(f"threshold must be positive, got {eps}")
    return frozenset(j for j, d in profile.delta.items() if d > eps)


def epsilon_schedule(n: int, xi: float, c: float = DEFAULT_C) -> float:
    """``c * n^(-xi/2)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < xi < 0.5:
        raise ValueError(f"xi must lie in (0, 1/2), got {xi}")
    return c * float(n) ** (-xi / 2.0)


def resolve_epsilon(eps, n: int, xi: float, c: float = DEFAULT_C) -> float:
    """Accept a number, ``"auto"`` (the schedule), or a callable ``n -> eps``."""
    if eps is None or eps == "auto":
        return epsilon_schedule(n, xi, c)
    if callable(eps):
        return float(eps(n))
    return float(eps)


def estimate_neighborhood(
    raster: SpikeRaster, i: int, xi: float = DEFAULT_XI, eps="auto", c: float = DEFAULT_C,
    ell_max: int | None = None,
) -> tuple[frozenset[int], SensitivityProfile, float]:
    table = count_contexts(raster, i, ell_max=ell_max)
    profile = sensitivity_profile(table, xi)
    e = resolve_epsilon(eps, raster.n, xi, c)
    return select_neighborhood(profile, e), profile, e


def estimate_graph(
    raster: SpikeRaster,
    xi: float = DEFAULT_XI,
    eps: float | str | Callable[[int], float] = "auto",
    c: float = DEFAULT_C,
    ell_max: int | None = None,
) -> EstimatedGraph:
    """Estimate the in-neighborhood of every sampled neuron."""
    if raster.n < 3:
        raise ValueError(f"need n >= 3, got {raster.n}")
    edges = []
    for i in raster.neurons:
        chosen, profile, e = estimate_neighborhood(raster, i, xi, eps, c, ell_max)
        for j in raster.neurons:
            if j == i:
                continue
            edges.append(Edge(j, i, profile.delta[j], e, j in chosen))
    return EstimatedGraph(raster.neurons, tuple(edges))
