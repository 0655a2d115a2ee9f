import numpy as np
import pytest

from spikegraph.model import PulseKernel, SpikeRaster, membrane_potential
from spikegraph.simulate import (
    SimulationConfig,
    simulate,
    simulate_coupled,
    simulate_with_uniforms,
    uniforms,
)

from .conftest import make_network


def test_same_seed_same_raster(chain_network):
    a = simulate(SimulationConfig(chain_network, 500, 7))
    b = simulate(SimulationConfig(chain_network, 500, 7))
    c = simulate(SimulationConfig(chain_network, 500, 8))
    assert a == b
    assert a != c


def test_uniforms_are_pure_in_seed_time_neuron():
    U = uniforms(3, 50, [0, 1, 2])
    assert np.array_equal(uniforms(3, 20, [0, 1, 2]), U[:20])
    assert np.array_equal(uniforms(3, 50, [2]), U[:, [2]])
    assert np.array_equal(uniforms(3, 50, [2, 0]), U[:, [2, 0]])


def test_horizon_prefix_property(chain_network):
    long = simulate(SimulationConfig(chain_network, 400, 1))
    short = simulate(SimulationConfig(chain_network, 150, 1))
    assert np.array_equal(long.bits[:150], short.bits)


def test_horizon_must_be_at_least_three(chain_network):
    with pytest.raises(ValueError):
        SimulationConfig(chain_network, 2, 0)


def test_independent_neuron_frequency():
    net = make_network(np.zeros((1, 1)), p_star=0.2)
    r = simulate(SimulationConfig(net, 10**4, 11))
    assert abs(r.bits.mean() - 0.5) <= 0.015


@pytest.mark.parametrize("seed", range(3))
def test_frequency_within_rate_envelope(seed, rng):
    W = rng.normal(scale=3.0, size=(4, 4))
    np.fill_diagonal(W, 0)
    net = make_network(W, p_star=0.15, beta=2.0)
    n = 10**4
    r = simulate(SimulationConfig(net, n, seed))
    sigma = np.sqrt(0.25 / n)
    freq = r.bits.mean(axis=0)
    assert np.all(freq >= 0.15 - 3 * sigma) and np.all(freq <= 0.85 + 3 * sigma)


@pytest.mark.parametrize("pulse", [PulseKernel("geometric", 0.7), PulseKernel("power", exponent=1.3)])
def test_spikes_follow_membrane_potential(pulse, rng):
    """Each simulated bit equals 1{U <= phi(potential)} recomputed from scratch."""
    W = rng.normal(scale=1.5, size=(3, 3))
    np.fill_diagonal(W, 0)
    net = make_network(W, p_star=0.1, pulse=pulse)
    n = 300
    U = uniforms(5, n, range(3))
    X = simulate_with_uniforms(net, U)
    raster = SpikeRaster(X)
    for t in range(1, n + 1):
        for i in range(3):
            u = membrane_potential(net, raster, i, t - 1) if t > 1 else 0.0
            phi = net.spec.rates[i](u)
            if abs(U[t - 1, i] - phi) > 1e-9:
                assert X[t - 1, i] == (U[t - 1, i] <= phi)


def test_conditional_one_step_law():
    """Fixed past, fresh uniforms for the last step: frequency matches phi."""
    W = np.array([[0.0, 1.2], [-0.7, 0.0]])
    net = make_network(W, p_star=0.1, ratio=0.6)
    past = SpikeRaster(np.array([[1, 0], [0, 1], [0, 1], [1, 0], [0, 0]]))
    reps = 10**5
    fresh = uniforms(99, reps, [0, 1])
    # U = 0 always spikes and U = 1 never does, which pins the past
    fixed = np.where(past.bits == 1, 0.0, 1.0)
    Ufull = np.vstack([fixed, fresh[:1]])
    counts = np.zeros(2)
    for r in range(reps):
        Ufull[-1] = fresh[r]
        X = simulate_with_uniforms(net, Ufull)
        counts += X[-1]
    assert np.array_equal(X[:-1], past.bits)
    for i in range(2):
        phi = net.spec.rates[i](membrane_potential(net, past, i, past.n))
        sd = np.sqrt(phi * (1 - phi) / reps)
        assert abs(counts[i] / reps - phi) <= 3 * sd


def test_coupled_identical_when_neighborhood_inside_region(chain_network):
    res = simulate_coupled(SimulationConfig(chain_network, 2000, 3), [0, 1], 1)
    assert res.raster_full == res.raster_approx
    assert not res.diverged
    assert res.raster_full == simulate(SimulationConfig(chain_network, 2000, 3))


def test_coupled_identical_when_outside_weights_vanish():
    W = np.zeros((3, 3))
    W[1, 0] = 1.0
    W[0, 2] = 0.5
    net = make_network(W)
    res = simulate_coupled(SimulationConfig(net, 1000, 4), [0, 1], 0)
    assert all(t is None for t in res.discrepancy_times.values())


def test_coupled_target_must_be_in_region(chain_network):
    with pytest.raises(ValueError):
        simulate_coupled(SimulationConfig(chain_network, 10, 0), [0, 2], 1)


def test_discrepancy_originates_at_target(rng):
    W = rng.normal(scale=2.0, size=(4, 4))
    np.fill_diagonal(W, 0)
    net = make_network(W, p_star=0.1)
    seen = 0
    for seed in range(50):
        res = simulate_coupled(SimulationConfig(net, 200, seed), [0, 1], 0)
        diff = res.raster_full.bits != res.raster_approx.bits
        for k, t in res.discrepancy_times.items():
            hits = np.flatnonzero(diff[:, k])
            assert t == (int(hits[0]) + 1 if hits.size else None)
        t_i = res.discrepancy_times[0]
        if t_i is None:
            assert not diff.any()
            continue
        seen += 1
        for k, t in res.discrepancy_times.items():
            if k != 0 and t is not None:
                assert t > t_i
    assert seen > 0
