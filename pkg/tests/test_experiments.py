import numpy as np
import pytest

from spikegraph.experiments import (
    ExperimentConfig,
    adversarial_raster,
    loglog_slope,
    run_experiment,
    wilson_interval,
)
from spikegraph.io import spec_to_dict

from .conftest import make_network


def chain_spec():
    W = np.zeros((3, 3))
    W[0, 1] = W[1, 2] = 2.0
    return spec_to_dict(make_network(W).spec)


def pair_spec():
    return spec_to_dict(make_network(np.array([[0.0, 1.0], [0.0, 0.0]])).spec)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig("nonsense", chain_spec())
    with pytest.raises(ValueError):
        ExperimentConfig("coupling", chain_spec(), replicates=0)
    with pytest.raises(ValueError):
        ExperimentConfig("coupling", chain_spec(), n_grid=[2])
    with pytest.raises(ValueError):
        ExperimentConfig("coupling")


def test_wilson_contains_estimate():
    for hits, n in [(0, 10), (10, 10), (3, 17), (500, 1000)]:
        lo, hi = wilson_interval(hits, n)
        assert 0 <= lo <= hits / n <= hi <= 1


def _check_rows(report):
    for row in report.rows:
        assert 0 <= row["frequency"] <= 1
        assert row["wilson_lo"] <= row["frequency"] <= row["wilson_hi"]
        assert "bound_raw" in row


def test_csv_identical_modulo_timestamp(tmp_path):
    outs = []
    for k in range(2):
        cfg = ExperimentConfig("consistency", chain_spec(), replicates=4, n_grid=[300, 600], seed=3, out_dir=str(tmp_path / str(k)))
        run_experiment(cfg)
        lines = (tmp_path / str(k) / "consistency.csv").read_text().splitlines()
        assert lines[0].startswith("# generated ")
        outs.append(lines[1:])
    assert outs[0] == outs[1]


def test_workers_do_not_change_output():
    base = dict(kind="coupling", spec=chain_spec(), replicates=8, n_grid=[30, 60], region=[1, 2], target=2, seed=5)
    serial = run_experiment(ExperimentConfig(**base, threads=1)).to_csv()
    pooled = run_experiment(ExperimentConfig(**base, threads=2)).to_csv()
    assert serial == pooled


def test_consistency_rows():
    rep = run_experiment(ExperimentConfig("consistency", chain_spec(), replicates=3, n_grid=[200, 400]))
    assert [r["n"] for r in rep.rows] == [200, 400]
    assert all(r["event"] == "graph_error" for r in rep.rows)
    _check_rows(rep)


def test_selection_experiments():
    over = ExperimentConfig("overestimation", chain_spec(), replicates=3, n_grid=[500], eps=[0.3, 0.6], target=2, candidate=0)
    rep = run_experiment(over)
    assert [r["param"] for r in rep.rows] == ["eps=0.3", "eps=0.6"]
    _check_rows(rep)
    under = ExperimentConfig("underestimation", chain_spec(), replicates=3, n_grid=[500], eps=[0.05], target=2, candidate=1)
    _check_rows(run_experiment(under))
    with pytest.raises(ValueError):
        run_experiment(ExperimentConfig("overestimation", chain_spec(), target=2, candidate=1))
    with pytest.raises(ValueError):
        run_experiment(ExperimentConfig("underestimation", chain_spec(), target=2))


def test_hoeffding_rows():
    cfg = ExperimentConfig("hoeffding", pair_spec(), replicates=20, n_grid=[200], target=1, ell=1, context="0", lambdas=[1.0, 50.0])
    rep = run_experiment(cfg)
    assert [r["param"] for r in rep.rows] == ["lambda=1.0", "lambda=50.0"]
    assert rep.rows[1]["frequency"] == 0.0
    _check_rows(rep)


def test_coupling_zero_when_region_closed():
    cfg = ExperimentConfig("coupling", chain_spec(), replicates=10, n_grid=[100], region=[0, 1], target=1)
    row = run_experiment(cfg).rows[0]
    assert row["frequency"] == 0.0 and row["bound_raw"] == 0.0


def test_adversarial_raster_shape():
    r = adversarial_raster(100, 3, 0)
    assert r.bits.shape == (100, 3)
    assert r.bits[:, 0].sum() == 1 and r.bits[0, 0] == 1


def test_runtime_report():
    rep = run_experiment(ExperimentConfig("runtime", n_grid=[200, 400], repeats=1))
    assert [r["n"] for r in rep.rows] == [200, 400]
    assert rep.slope == rep.rows[0]["fitted_slope"]
    assert loglog_slope([1, 2, 4], [1, 4, 16]) == pytest.approx(2.0)
