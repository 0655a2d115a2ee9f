"""File formats: network spec JSON, raster/table/graph CSV, report JSON."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .contexts import ContextTable, iter_rows
from .estimator import EstimatedGraph
from .model import NetworkSpec, PulseKernel, RateFunction, SpikeRaster


class ParseError(ValueError):
    """Malformed input file; the message names the offending line or field."""


_RATE_SCHEMA = {
    "type": "object",
    "required": ["family", "p_star"],
    "properties": {
        "family": {"enum": ["clipped-sigmoid", "clipped-linear"]},
        "p_star": {"type": "number"},
        "beta": {"type": "number"},
        "slope": {"type": "number"},
        "intercept": {"type": "number"},
    },
}
_PULSE_SCHEMA = {
    "type": "object",
    "required": ["family"],
    "properties": {
        "family": {"enum": ["geometric", "power"]},
        "ratio": {"type": "number"},
        "exponent": {"type": "number"},
    },
}
SPEC_SCHEMA = {
    "type": "object",
    "required": ["neurons", "weights", "rate", "pulse"],
    "properties": {
        "neurons": {"type": "integer", "minimum": 1},
        "weights": {
            "type": "array",
            "items": {"anyOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}}]},
        },
        "rate": {"anyOf": [_RATE_SCHEMA, {"type": "array", "items": _RATE_SCHEMA}]},
        "pulse": {"anyOf": [_PULSE_SCHEMA, {"type": "array", "items": _PULSE_SCHEMA}]},
    },
}


_SPEC_VALIDATOR = jsonschema.Draft202012Validator(SPEC_SCHEMA)


def spec_from_dict(doc: dict) -> NetworkSpec:
    try:
        _SPEC_VALIDATOR.validate(doc)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ParseError(f"spec schema error at {where}: {exc.message}") from None
    N = doc["neurons"]
    W = np.asarray(doc["weights"], dtype=float)
    if W.ndim == 1 and W.size == N * N:
        W = W.reshape(N, N)
    if W.shape != (N, N):
        raise ParseError(f"spec field 'weights': expected {N}x{N}, got shape {W.shape}")

    def many(entry, cls):
        items = entry if isinstance(entry, list) else [entry] * N
        if len(items) != N:
            raise ParseError(f"expected {N} entries, got {len(items)}")
        return tuple(cls(**item) for item in items)

    return NetworkSpec(W, many(doc["rate"], RateFunction), many(doc["pulse"], PulseKernel))


def spec_to_dict(spec: NetworkSpec) -> dict:
    rates = [r.to_dict() for r in spec.rates]
    pulses = [g.to_dict() for g in spec.pulses]
    return {
        "neurons": spec.neuron_count,
        "weights": spec.weights.tolist(),
        "rate": rates[0] if len(set(spec.rates)) == 1 else rates,
        "pulse": pulses[0] if len(set(spec.pulses)) == 1 else pulses,
    }


def load_spec(path) -> NetworkSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return spec_from_dict(doc)


def save_spec(spec: NetworkSpec, path) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec), indent=2) + "\n")


def load_raster(path) -> SpikeRaster:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        try:
            neurons = tuple(int(h) for h in header)
        except ValueError:
            raise ParseError(f"{path}: line 1: neuron ids must be integers, got {header}") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(neurons):
                raise ParseError(f"{path}: line {lineno}: expected {len(neurons)} cells, got {len(row)}")
            for col, cell in enumerate(row):
                if cell not in ("0", "1"):
                    raise ParseError(
                        f"{path}: line {lineno}, column {col + 1} (neuron {neurons[col]}): "
                        f"non-binary entry {cell!r}"
                    )
            rows.append([int(c) for c in row])
    bits = np.array(rows, dtype=np.uint8).reshape(len(rows), len(neurons))
    return SpikeRaster(bits, neurons)


def save_raster(raster: SpikeRaster, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(str(k) for k in raster.neurons) + "\n")
        for row in raster.bits:
            fh.write(",".join("1" if b else "0" for b in row) + "\n")


def save_table(table: ContextTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ell", "w", "n0", "n1"])
        for row in iter_rows(table):
            w.writerow(row)


def save_graph(graph: EstimatedGraph, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "target", "delta", "epsilon_used", "selected"])
        for e in graph.edges:
            w.writerow([e.source, e.target, repr(e.delta), repr(e.epsilon), int(e.selected)])


def load_graph(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {
                "source": int(r["source"]),
                "target": int(r["target"]),
                "delta": float(r["delta"]),
                "epsilon_used": float(r["epsilon_used"]),
                "selected": r["selected"] == "1",
            }
            for r in csv.DictReader(fh)
        ]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def save_report(report, path) -> None:
    doc = report.to_dict() if hasattr(report, "to_dict") else report
    Path(path).write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
