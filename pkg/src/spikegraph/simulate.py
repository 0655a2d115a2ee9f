"""
Trajectory generation and the shared-uniform coupling with the fixed-range
approximation.

Uniforms are counter-based: ``U_t(j)`` is the ``t``-th draw of a Philox
stream keyed by ``(j, seed)``, so it depends only on ``(seed, t, j)`` and not
on the horizon or the network size.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numba
import numpy as np

from .model import SpikeRaster, ValidatedNetwork, validate_network

_SEED_MASK = (1 << 64) - 1


def uniforms(seed: int, n: int, neurons: Iterable[int]) -> np.ndarray:
    """Matrix ``U[t - 1, k] = U_t(neurons[k])`` for ``t = 1..n``."""
    seed = int(seed) & _SEED_MASK
    cols = [
        np.random.Generator(np.random.Philox(key=(int(j) << 64) | seed)).random(n)
        for j in neurons
    ]
    return np.stack(cols, axis=1) if cols else np.empty((n, 0))


@dataclass(frozen=True)
class SimulationConfig:
    network: ValidatedNetwork
    n: int
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.network, ValidatedNetwork):
            object.__setattr__(self, "network", validate_network(self.network))
        if self.n < 3:
            raise ValueError(f"horizon must be at least 3, got {self.n}")


@dataclass(frozen=True)
class CoupledResult:
    raster_full: SpikeRaster
    raster_approx: SpikeRaster
    discrepancy_times: dict[int, int | None]

    @property
    def diverged(self) -> bool:
        return any(t is not None for t in self.discrepancy_times.values())


def _kernel_arrays(network: ValidatedNetwork):
    spec = network.spec
    rate_code = np.array([0 if r.family == "clipped-sigmoid" else 1 for r in spec.rates], np.int64)
    p_star = np.array([r.p_star for r in spec.rates])
    beta = np.array([r.beta for r in spec.rates])
    slope = np.array([r.slope for r in spec.rates])
    intercept = np.array([r.intercept for r in spec.rates])
    pulse_code = np.array([0 if g.family == "geometric" else 1 for g in spec.pulses], np.int64)
    pulse_par = np.array([g.ratio if g.family == "geometric" else g.exponent for g in spec.pulses])
    return rate_code, p_star, beta, slope, intercept, pulse_code, pulse_par


@numba.njit(cache=True)
def _rate(code, p, beta, slope, intercept, u):
    if code == 0:
        a = beta * u
        if a >= 0:
            z = np.exp(-a)
            sig = 1.0 / (1.0 + z)
        else:
            z = np.exp(a)
            sig = z / (1.0 + z)
        return p + (1.0 - 2.0 * p) * sig
    v = slope * u + intercept
    if v < p:
        return p
    if v > 1.0 - p:
        return 1.0 - p
    return v


@numba.njit(cache=True)
def _simulate_kernel(W, rate_code, p_star, beta, slope, intercept, pulse_code, pulse_par, U):
    n, N = U.shape
    X = np.zeros((n, N), dtype=np.uint8)
    last = np.zeros(N, dtype=np.int64)  # everyone spiked at time 0
    acc = np.zeros((N, N))  # acc[i, j]: geometric pulse mass from j since i's last spike
    for t in range(1, n + 1):
        # potentials after time t-1 decide the spikes at t
        for i in range(N):
            u = 0.0
            for j in range(N):
                w = W[j, i]
                if w == 0.0:
                    continue
                if pulse_code[j] == 0:
                    u += w * acc[i, j]
                else:
                    s_acc = 0.0
                    for s in range(last[i] + 1, t):
                        if X[s - 1, j]:
                            s_acc += (t - s) ** (-pulse_par[j])
                    u += w * s_acc
            phi = _rate(rate_code[i], p_star[i], beta[i], slope[i], intercept[i], u)
            if U[t - 1, i] <= phi:
                X[t - 1, i] = 1
        for i in range(N):
            if X[t - 1, i]:
                last[i] = t
                for j in range(N):
                    acc[i, j] = 0.0
            else:
                for j in range(N):
                    if pulse_code[j] == 0:
                        acc[i, j] = acc[i, j] * pulse_par[j] + X[t - 1, j]
    return X


def simulate_with_uniforms(network: ValidatedNetwork, U: np.ndarray, weights=None) -> np.ndarray:
    """Run the dynamics on a given uniform matrix; returns the bit matrix."""
    W = np.ascontiguousarray(network.weights if weights is None else weights, dtype=float)
    return _simulate_kernel(W, *_kernel_arrays(network), np.ascontiguousarray(U, dtype=float))


def simulate(config: SimulationConfig) -> SpikeRaster:
    """Sample ``X_1 .. X_n`` for every neuron, spiking iff ``U_t(i) <= phi_i(potential)``."""
    net = config.network
    neurons = tuple(range(net.neuron_count))
    U = uniforms(config.seed, config.n, neurons)
    return SpikeRaster(simulate_with_uniforms(net, U), neurons)


def approximation_weights(network: ValidatedNetwork, region: Iterable[int], i: int) -> np.ndarray:
    """Weights of the fixed-range approximation: ``i`` keeps only inputs from ``region``."""
    W = np.array(network.weights, dtype=float)
    outside = np.ones(W.shape[0], dtype=bool)
    outside[list(region)] = False
    W[outside, i] = 0.0
    return W


def simulate_coupled(config: SimulationConfig, region: Iterable[int], i: int) -> CoupledResult:
    """Evolve the process and its fixed-range approximation on shared uniforms."""
    region = sorted(set(int(k) for k in region))
    if i not in region:
        raise ValueError(f"target {i} not in region {region}")
    net = config.network
    if any(not 0 <= k < net.neuron_count for k in region):
        raise ValueError(f"region {region} has neurons outside the network")
    neurons = tuple(range(net.neuron_count))
    U = uniforms(config.seed, config.n, neurons)
    full = simulate_with_uniforms(net, U)
    approx = simulate_with_uniforms(net, U, approximation_weights(net, region, i))
    diff = full != approx
    times = {}
    for k in neurons:
        hits = np.flatnonzero(diff[:, k])
        times[k] = int(hits[0]) + 1 if hits.size else None
    return CoupledResult(SpikeRaster(full, neurons), SpikeRaster(approx, neurons), times)
