"""
Monte Carlo experiments pairing empirical event frequencies with the
corresponding theoretical bounds, plus the counting runtime benchmark.

Replicate ``k`` uses seed ``seed + k``. Because uniforms are counter-based,
the raster of length ``n`` is the prefix of the raster of any longer
horizon, so each replicate is simulated once at the largest ``n``.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .bounds import (
    BoundUnavailable,
    compute_constants,
    coupling_bound,
    hoeffding_bound,
    theorem2_bounds,
)
from .contexts import ContextKey, count_contexts
from .estimator import DEFAULT_C, DEFAULT_XI, estimate_graph, estimate_neighborhood, resolve_epsilon
from .model import (
    NetworkSpec,
    SpikeRaster,
    ValidatedNetwork,
    transition_probability,
    true_neighborhood,
    validate_network,
)
from .simulate import SimulationConfig, simulate, simulate_coupled

log = logging.getLogger(__name__)

KINDS = ("consistency", "overestimation", "underestimation", "hoeffding", "coupling", "runtime")


@dataclass
class ExperimentConfig:
    kind: str
    spec: str | dict | NetworkSpec | None = None
    replicates: int = 100
    n_grid: list[int] = field(default_factory=lambda: [1000])
    xi: float = DEFAULT_XI
    eps: list[float] | None = None  # None: use the schedule c * n^(-xi/2)
    c: float = DEFAULT_C
    seed: int = 0
    out_dir: str | None = None
    target: int = 0
    candidate: int | None = None
    region: list[int] | None = None
    ell: int = 1
    context: str | None = None  # window bits for the hoeffding experiment
    lambdas: list[float] = field(default_factory=lambda: [5.0, 10.0, 15.0, 20.0])
    region_size: int = 3  # runtime benchmark raster width
    repeats: int = 3
    threads: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if any(n < 3 for n in self.n_grid):
            raise ValueError("every n in the grid must be >= 3")
        if self.kind != "runtime" and self.spec is None:
            raise ValueError(f"{self.kind} experiment needs a network spec")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        doc = json.loads(Path(path).read_text())
        spec = doc.get("spec")
        if isinstance(spec, str) and not Path(spec).is_absolute():
            doc["spec"] = str(Path(path).parent / spec)
        return cls(**doc)


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list[dict]
    slope: float | None = None

    def to_csv(self) -> str:
        if not self.rows:
            return ""
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(self.rows[0]), lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})
        return buf.getvalue()

    def to_dict(self) -> dict:
        spec = self.config.spec
        cfg = {f.name: getattr(self.config, f.name) for f in dataclasses.fields(self.config) if f.name != "spec"}
        cfg["spec"] = spec if isinstance(spec, (str, dict)) else "<in-memory>"
        return {"config": cfg, "rows": self.rows, "slope": self.slope}

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        csv_path = out / f"{self.config.kind}.csv"
        csv_path.write_text(f"# generated {stamp}\n" + self.to_csv())
        json_path = out / f"{self.config.kind}.json"
        from .io import _jsonable

        json_path.write_text(json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return v


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    ci = stats.binomtest(successes, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def _row(event: str, n: int, param: str, hits: int, reps: int, bound: float | None) -> dict:
    lo, hi = wilson_interval(hits, reps)
    freq = hits / reps
    return {
        "event": event,
        "n": n,
        "param": param,
        "frequency": freq,
        "bound_raw": bound,
        "bound_clamped": None if bound is None else min(1.0, max(0.0, bound)),
        "replicates": reps,
        "wilson_lo": lo,
        "wilson_hi": hi,
        "mc_stderr": float(np.sqrt(freq * (1 - freq) / reps)),
    }


def _network(cfg: ExperimentConfig) -> ValidatedNetwork:
    spec = cfg.spec
    if isinstance(spec, ValidatedNetwork):
        return spec
    if isinstance(spec, NetworkSpec):
        return validate_network(spec)
    from .io import load_spec, spec_from_dict

    return validate_network(spec_from_dict(spec) if isinstance(spec, dict) else load_spec(spec))


def _region(cfg: ExperimentConfig, net: ValidatedNetwork) -> list[int]:
    return sorted(cfg.region) if cfg.region is not None else list(range(net.neuron_count))


# --- per-replicate workers (top level so they pickle) --------------------------


def _replicate_consistency(cfg: ExperimentConfig, k: int) -> list[bool]:
    net = _network(cfg)
    region = _region(cfg, net)
    raster = simulate(SimulationConfig(net, max(cfg.n_grid), cfg.seed + k)).restrict(region)
    truth = {(j, i) for i in region for j in true_neighborhood(net, i) if j in region}
    out = []
    for n in cfg.n_grid:
        sub = SpikeRaster(raster.bits[:n], raster.neurons)
        eps = cfg.eps[0] if cfg.eps else "auto"
        out.append(set(estimate_graph(sub, cfg.xi, eps, cfg.c).edge_set) == truth)
    return out


def _eps_grid(cfg: ExperimentConfig, n: int) -> list[float]:
    return list(cfg.eps) if cfg.eps else [resolve_epsilon("auto", n, cfg.xi, cfg.c)]


def _replicate_selection(cfg: ExperimentConfig, k: int) -> list[bool]:
    net = _network(cfg)
    region = _region(cfg, net)
    raster = simulate(SimulationConfig(net, max(cfg.n_grid), cfg.seed + k)).restrict(region)
    out = []
    for n in cfg.n_grid:
        sub = SpikeRaster(raster.bits[:n], raster.neurons)
        _, profile, _ = estimate_neighborhood(sub, cfg.target, cfg.xi, 1.0, cfg.c)
        for eps in _eps_grid(cfg, n):
            selected = profile.delta[cfg.candidate] > eps
            out.append(selected if cfg.kind == "overestimation" else not selected)
    return out


def _replicate_hoeffding(cfg: ExperimentConfig, k: int) -> list[bool]:
    net = _network(cfg)
    region = _region(cfg, net)
    t = max(cfg.n_grid)
    raster = simulate(SimulationConfig(net, t, cfg.seed + k)).restrict(region)
    others = [j for j in region if j != cfg.target]
    key = ContextKey.from_string(cfg.ell, cfg.context, len(others))
    p = transition_probability(net, cfg.target, others, key.to_array())
    n0, n1 = count_contexts(raster, cfg.target, ell_max=cfg.ell).counts.get(key, (0, 0))
    M = n1 - p * (n0 + n1)
    return [abs(M) > lam for lam in cfg.lambdas]


def _replicate_coupling(cfg: ExperimentConfig, k: int) -> list[bool]:
    net = _network(cfg)
    region = _region(cfg, net)
    res = simulate_coupled(SimulationConfig(net, max(cfg.n_grid), cfg.seed + k), region, cfg.target)
    first = res.discrepancy_times[cfg.target]
    return [first is not None and first <= n for n in cfg.n_grid]


_WORKERS = {
    "consistency": _replicate_consistency,
    "overestimation": _replicate_selection,
    "underestimation": _replicate_selection,
    "hoeffding": _replicate_hoeffding,
    "coupling": _replicate_coupling,
}


def _run_replicates(cfg: ExperimentConfig) -> np.ndarray:
    fn = _WORKERS[cfg.kind]
    idx = range(cfg.replicates)
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(fn, [cfg] * cfg.replicates, idx, chunksize=max(1, cfg.replicates // (4 * cfg.threads))))
    else:
        results = [fn(cfg, k) for k in idx]
    return np.array(results, dtype=bool)


# --- bounds for each experiment kind --------------------------------------------


def _graph_error_bound(net: ValidatedNetwork, region, n, xi, eps) -> float | None:
    """Union bound on P(estimated graph != true graph on the region)."""
    total = 0.0
    for i in region:
        c = compute_constants(net, i, region)
        V = [j for j in c.neighborhood if j in region]
        rep = theorem2_bounds(n, xi, eps, c)
        non = len(region) - 1 - len(V)
        if non:
            if not rep.overestimation.available:
                return None
            total += non * rep.overestimation.raw
        if V:
            if not rep.underestimation.available:
                return None
            total += len(V) * rep.underestimation.raw
    return total


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run one experiment; deterministic given ``cfg`` (except runtime timings)."""
    if cfg.kind == "runtime":
        return run_runtime(cfg)
    net = _network(cfg)
    region = _region(cfg, net)
    # workers get the validated network, not the spec file to re-parse
    original, cfg = cfg, dataclasses.replace(cfg, spec=net)
    if cfg.kind in ("overestimation", "underestimation"):
        if cfg.candidate is None or cfg.candidate == cfg.target:
            raise ValueError("selection experiments need a candidate neuron distinct from the target")
        is_nb = cfg.candidate in true_neighborhood(net, cfg.target)
        if is_nb != (cfg.kind == "underestimation"):
            raise ValueError(
                f"candidate {cfg.candidate} must {'' if cfg.kind == 'underestimation' else 'not '}"
                f"be a presynaptic neuron of {cfg.target}"
            )
    hits = _run_replicates(cfg)
    reps = cfg.replicates
    rows = []
    if cfg.kind == "consistency":
        for col, n in enumerate(cfg.n_grid):
            eps = cfg.eps[0] if cfg.eps else resolve_epsilon("auto", n, cfg.xi, cfg.c)
            bound = _graph_error_bound(net, region, n, cfg.xi, eps)
            errors = int(reps - hits[:, col].sum())
            rows.append(_row("graph_error", n, f"eps={eps!r}", errors, reps, bound))
    elif cfg.kind in ("overestimation", "underestimation"):
        consts = compute_constants(net, cfg.target, region)
        col = 0
        for n in cfg.n_grid:
            for eps in _eps_grid(cfg, n):
                rep = theorem2_bounds(n, cfg.xi, eps, consts)
                bv = rep.overestimation if cfg.kind == "overestimation" else rep.underestimation
                event = "false_edge" if cfg.kind == "overestimation" else "missed_edge"
                rows.append(_row(event, n, f"eps={eps!r}", int(hits[:, col].sum()), reps, bv.raw))
                col += 1
    elif cfg.kind == "hoeffding":
        t = max(cfg.n_grid)
        for col, lam in enumerate(cfg.lambdas):
            bound = hoeffding_bound(t, cfg.ell, lam)
            rows.append(_row("centred_count_exceeds", t, f"lambda={lam!r}", int(hits[:, col].sum()), reps, bound))
    elif cfg.kind == "coupling":
        consts = compute_constants(net, cfg.target, region)
        for col, n in enumerate(cfg.n_grid):
            try:
                bound = coupling_bound(consts, n)
            except BoundUnavailable:
                bound = None
            rows.append(_row("discrepancy", n, f"sigma={consts.sigma_region!r}", int(hits[:, col].sum()), reps, bound))
    report = ExperimentReport(original, rows)
    if cfg.out_dir:
        report.write(cfg.out_dir)
    return report


# --- runtime benchmark ---------------------------------------------------------------


def adversarial_raster(n: int, width: int, seed: int = 0) -> SpikeRaster:
    """Target (column 0) spikes only at time 1, so every later step has the
    longest possible past; the other columns are fair coin flips."""
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(n, width), dtype=np.uint8)
    bits[:, 0] = 0
    bits[0, 0] = 1
    return SpikeRaster(bits)


def loglog_slope(ns: Sequence[float], seconds: Sequence[float]) -> float:
    return float(np.polyfit(np.log(ns), np.log(seconds), 1)[0])


def time_counting(raster: SpikeRaster, target: int = 0, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        count_contexts(raster, target)
        best = min(best, time.perf_counter() - t0)
    return best


def run_runtime(cfg: ExperimentConfig) -> ExperimentReport:
    rows = []
    for n in cfg.n_grid:
        raster = adversarial_raster(n, cfg.region_size, cfg.seed)
        sec = time_counting(raster, 0, cfg.repeats)
        rows.append({"event": "count_contexts", "n": n, "seconds": sec})
        log.info("n=%d: %.4fs", n, sec)
    slope = loglog_slope([r["n"] for r in rows], [r["seconds"] for r in rows]) if len(rows) > 1 else None
    for r in rows:
        r["fitted_slope"] = slope
    report = ExperimentReport(cfg, rows, slope)
    if cfg.out_dir:
        report.write(cfg.out_dir)
    return report
