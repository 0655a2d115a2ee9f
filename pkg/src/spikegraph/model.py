"""
Generative model for discrete-time spiking networks with variable-length memory.

Each neuron spikes at time ``t + 1`` with probability ``phi_i(u)``, where the
membrane potential ``u`` accumulates weighted postsynaptic pulses emitted by
presynaptic neurons since the last spike of ``i``. A spike resets the
potential of the spiking neuron.

Neurons are indexed ``0 .. N-1`` and ``weights[j, i]`` is the synaptic weight
of ``j`` on ``i``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

RHO_TRUNCATION = 10**6


class ModelWarning(UserWarning):
    """Raised for conditions that weaken, but do not invalidate, a model."""


class NetworkValidationError(ValueError):
    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class RateFunction:
    """Spike rate function with values in ``[p_star, 1 - p_star]``.

    ``clipped-sigmoid``: ``p* + (1 - 2p*) / (1 + exp(-beta u))``.
    ``clipped-linear``: ``min(1 - p*, max(p*, slope * u + intercept))``.
    """

    family: Literal["clipped-sigmoid", "clipped-linear"] = "clipped-sigmoid"
    p_star: float = 0.1
    beta: float = 1.0
    slope: float = 1.0
    intercept: float = 0.5

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        p = self.p_star
        if self.family == "clipped-sigmoid":
            # split by sign so exp never overflows
            z = np.exp(-np.abs(self.beta * u))
            sig = np.where(u >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
            out = p + (1.0 - 2.0 * p) * sig
        else:
            out = np.minimum(1.0 - p, np.maximum(p, self.slope * u + self.intercept))
        return out if out.ndim else float(out)

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "clipped-sigmoid":
            z = np.exp(-np.abs(self.beta * u))
            sig = 1.0 / (1.0 + z)
            out = (1.0 - 2.0 * self.p_star) * self.beta * sig * (1.0 - sig)
        else:
            lo, hi = self.linear_segment()
            out = np.where((u > lo) & (u < hi), self.slope, 0.0)
        return out if out.ndim else float(out)

    def sup_derivative(self) -> float:
        if self.family == "clipped-sigmoid":
            return (1.0 - 2.0 * self.p_star) * self.beta / 4.0
        return self.slope

    def linear_segment(self) -> tuple[float, float]:
        """Inputs on which the clipped-linear rate is strictly increasing."""
        if self.family != "clipped-linear":
            return (-math.inf, math.inf)
        return (
            (self.p_star - self.intercept) / self.slope,
            (1.0 - self.p_star - self.intercept) / self.slope,
        )

    def to_dict(self) -> dict:
        if self.family == "clipped-sigmoid":
            return {"family": self.family, "p_star": self.p_star, "beta": self.beta}
        return {
            "family": self.family,
            "p_star": self.p_star,
            "slope": self.slope,
            "intercept": self.intercept,
        }


@dataclass(frozen=True)
class PulseKernel:
    """Postsynaptic pulse ``g(t)`` for integer ``t >= 1``.

    ``geometric``: ``ratio ** (t - 1)``; ``power``: ``t ** -exponent``.
    """

    family: Literal["geometric", "power"] = "geometric"
    ratio: float = 0.5
    exponent: float = 2.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "geometric":
            out = self.ratio ** (t - 1.0)
        else:
            out = t ** (-self.exponent)
        return out if out.ndim else float(out)

    def mass(self) -> tuple[float, float]:
        """Return ``(sum_{t>=1} g(t), absolute error bound)``.

        Power kernels are summed to ``RHO_TRUNCATION`` and the tail is
        bracketed by the integrals of ``t^-q`` over ``[T+1, inf)`` and
        ``[T, inf)``; the midpoint is returned.
        """
        if self.family == "geometric":
            return 1.0 / (1.0 - self.ratio), 0.0
        q = self.exponent
        if q <= 1.0:
            return math.inf, math.inf
        T = RHO_TRUNCATION
        t = np.arange(T, 0, -1, dtype=float)  # small terms first
        head = float(np.sum(t ** (-q)))
        tail_lo = (T + 1.0) ** (1.0 - q) / (q - 1.0)
        tail_hi = float(T) ** (1.0 - q) / (q - 1.0)
        return head + 0.5 * (tail_lo + tail_hi), 0.5 * (tail_hi - tail_lo)

    def discounted_mass(self, alpha: float) -> float:
        """``sum_{t>=1} exp(-alpha t) g(t)``."""
        if alpha == 0.0:
            return self.mass()[0]
        if self.family == "geometric":
            z = self.ratio * math.exp(-alpha)
            return math.exp(-alpha) / (1.0 - z)
        # e^{-alpha t} t^{-q}: sum to T, remainder bounded by T^{-q} e^{-alpha T} / alpha
        T = int(min(RHO_TRUNCATION, max(100.0, 50.0 / alpha)))
        t = np.arange(T, 0, -1, dtype=float)
        head = float(np.sum(np.exp(-alpha * t) * t ** (-self.exponent)))
        rem = float(T) ** (-self.exponent) * math.exp(-alpha * T) / alpha
        return head + 0.5 * rem

    def to_dict(self) -> dict:
        if self.family == "geometric":
            return {"family": self.family, "ratio": self.ratio}
        return {"family": self.family, "exponent": self.exponent}


@dataclass(frozen=True)
class NetworkSpec:
    weights: np.ndarray
    rates: tuple[RateFunction, ...]
    pulses: tuple[PulseKernel, ...]

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise NetworkValidationError([f"weights must be square, got shape {w.shape}"])
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        rates, pulses = self.rates, self.pulses
        if isinstance(rates, RateFunction):
            rates = (rates,) * w.shape[0]
        if isinstance(pulses, PulseKernel):
            pulses = (pulses,) * w.shape[0]
        object.__setattr__(self, "rates", tuple(rates))
        object.__setattr__(self, "pulses", tuple(pulses))
        if len(self.rates) != w.shape[0] or len(self.pulses) != w.shape[0]:
            raise NetworkValidationError(["one rate function and one pulse kernel per neuron required"])

    @property
    def neuron_count(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def homogeneous(cls, weights, rate: RateFunction, pulse: PulseKernel) -> "NetworkSpec":
        return cls(np.asarray(weights, dtype=float), rate, pulse)

    def with_weights(self, weights) -> "NetworkSpec":
        return NetworkSpec(np.asarray(weights, dtype=float), self.rates, self.pulses)


@dataclass(frozen=True)
class ValidatedNetwork:
    """A network that passed validation, with its model constants attached."""

    spec: NetworkSpec
    r: float
    gamma: float
    p_star: float
    p_min: float
    rho: tuple[float, ...]
    rho_error: tuple[float, ...]
    warnings: tuple[str, ...] = ()

    @property
    def weights(self) -> np.ndarray:
        return self.spec.weights

    @property
    def neuron_count(self) -> int:
        return self.spec.neuron_count


@dataclass(frozen=True)
class SpikeRaster:
    """Binary spike matrix; row ``t - 1`` holds the spikes at time ``t``.

    Every neuron is taken to have spiked at time 0, so each neuron has a last
    spike time at every ``t >= 1``.
    """

    bits: np.ndarray
    neurons: tuple[int, ...] = field(default=())
    past_convention: bool = True

    def __post_init__(self):
        b = np.array(self.bits, dtype=np.uint8)
        if b.ndim != 2:
            raise ValueError(f"raster must be 2-d (time x neuron), got {b.ndim}-d")
        if b.size and b.max() > 1:
            raise ValueError("raster entries must be 0 or 1")
        neurons = tuple(int(k) for k in self.neurons) if self.neurons else tuple(range(b.shape[1]))
        if len(neurons) != b.shape[1]:
            raise ValueError(f"{len(neurons)} neuron ids for {b.shape[1]} columns")
        if len(set(neurons)) != len(neurons):
            raise ValueError("duplicate neuron ids")
        if not self.past_convention:
            raise ValueError("only the all-spike-at-time-0 past is supported")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)
        object.__setattr__(self, "neurons", neurons)

    @property
    def n(self) -> int:
        return self.bits.shape[0]

    def column(self, neuron: int) -> int:
        try:
            return self.neurons.index(neuron)
        except ValueError:
            raise KeyError(f"neuron {neuron} not in raster") from None

    def restrict(self, neurons: Sequence[int]) -> "SpikeRaster":
        cols = [self.column(k) for k in neurons]
        return SpikeRaster(self.bits[:, cols], tuple(neurons))

    def __eq__(self, other):
        if not isinstance(other, SpikeRaster):
            return NotImplemented
        return self.neurons == other.neurons and np.array_equal(self.bits, other.bits)

    __hash__ = None


def _check_network(spec: NetworkSpec) -> tuple[list[str], list[str]]:
    errors, notes, linear = [], [], []
    w = spec.weights
    if w.shape[0] < 1:
        errors.append("network needs at least one neuron")
    if not np.all(np.isfinite(w)):
        errors.append("weights must be finite")
    diag = np.flatnonzero(np.diag(w))
    if diag.size:
        errors.append(f"nonzero self-weight at neuron(s) {diag.tolist()}")
    for k, rate in enumerate(spec.rates):
        if not 0.0 < rate.p_star < 0.5:
            errors.append(f"neuron {k}: p_star not in (0, 1/2) (got {rate.p_star})")
        if rate.family == "clipped-sigmoid":
            if not rate.beta > 0:
                errors.append(f"neuron {k}: sigmoid gain must be positive")
        elif rate.family == "clipped-linear":
            if not rate.slope > 0:
                errors.append(f"neuron {k}: linear slope must be positive")
            else:
                lo, hi = rate.linear_segment()
                if not lo < hi:
                    errors.append(f"neuron {k}: empty linear segment")
                linear.append(k)
        else:
            errors.append(f"neuron {k}: unknown rate family {rate.family!r}")
    if linear:
        notes.append(f"clipped-linear rate of neuron(s) {linear} is only piecewise C1")
    for k, pulse in enumerate(spec.pulses):
        if pulse.family == "geometric":
            if not 0.0 < pulse.ratio < 1.0:
                errors.append(f"neuron {k}: geometric ratio must lie in (0, 1)")
        elif pulse.family == "power":
            if not pulse.exponent > 0:
                errors.append(f"neuron {k}: non-positive kernel exponent")
            elif pulse.exponent <= 1.0:
                notes.append(
                    f"neuron {k}: power kernel with exponent <= 1 has infinite mass; "
                    "coupling bounds are unavailable"
                )
        else:
            errors.append(f"neuron {k}: unknown pulse family {pulse.family!r}")
    return errors, notes


def validate_network(spec: NetworkSpec) -> ValidatedNetwork:
    """Check the standing assumptions and attach the derived constants.

    Raises
    ------
    NetworkValidationError
        With one entry per violated assumption.
    """
    errors, notes = _check_network(spec)
    if errors:
        raise NetworkValidationError(errors)
    for note in notes:
        warnings.warn(note, ModelWarning, stacklevel=2)
    w = spec.weights
    masses = [pulse.mass() for pulse in spec.pulses]
    p_star = min(rate.p_star for rate in spec.rates)
    return ValidatedNetwork(
        spec=spec,
        r=float(np.abs(w).sum(axis=0).max()),
        gamma=max(rate.sup_derivative() for rate in spec.rates),
        p_star=p_star,
        p_min=min(p_star, 1.0 - p_star),
        rho=tuple(m for m, _ in masses),
        rho_error=tuple(e for _, e in masses),
        warnings=tuple(notes),
    )


def _as_spec(network) -> NetworkSpec:
    return network.spec if isinstance(network, ValidatedNetwork) else network


def last_spike_time(column: np.ndarray, t: int) -> int:
    """Last ``s <= t`` with a spike in ``column`` (1-based times, 0 if none)."""
    hits = np.flatnonzero(column[:t])
    return int(hits[-1]) + 1 if hits.size else 0


def membrane_potential(network, raster: SpikeRaster, i: int, t: int) -> float:
    """Potential of neuron ``i`` after time ``t``, driving the spike at ``t + 1``.

    Sums ``W[j, i] * g_j(t + 1 - s) * X_s(j)`` over ``s`` from the last spike
    of ``i`` (exclusive) up to ``t``.
    """
    spec = _as_spec(network)
    if not 1 <= t <= raster.n:
        raise ValueError(f"time {t} outside 1..{raster.n}")
    last = last_spike_time(raster.bits[:, raster.column(i)], t)
    if last == t:
        return 0.0
    total = 0.0
    lags = np.arange(t - last, 0, -1)  # t+1-s for s = last+1 .. t
    for j in np.flatnonzero(spec.weights[:, i]):
        window = raster.bits[last:t, raster.column(int(j))]
        total += spec.weights[j, i] * float(np.dot(spec.pulses[j](lags), window))
    return total


def transition_probability(network, i: int, others: Sequence[int], window) -> float:
    """Exact spike probability of ``i`` after a gap of ``ell`` silent steps,
    given the window of ``others`` over those steps (row 0 is the oldest).

    Only meaningful when every presynaptic neuron of ``i`` is in ``others``.
    """
    spec = _as_spec(network)
    window = np.asarray(window, dtype=float)
    ell = window.shape[0]
    lags = np.arange(ell, 0, -1)
    u = 0.0
    for col, j in enumerate(others):
        w = spec.weights[j, i]
        if w != 0.0:
            u += w * float(np.dot(spec.pulses[j](lags), window[:, col]))
    return float(spec.rates[i](u))


def true_neighborhood(network, i: int) -> frozenset[int]:
    spec = _as_spec(network)
    col = spec.weights[:, i]
    return frozenset(int(j) for j in np.flatnonzero(col) if j != i)


def rate_derivative_inf(rate: RateFunction, interval: tuple[float, float]) -> float:
    """Infimum of the rate derivative over a closed interval.

    The sigmoid derivative is unimodal with its peak at 0, so the infimum is
    attained at an endpoint. For clipped-linear rates the slope is returned
    when the interval lies strictly inside the linear segment, otherwise 0
    with a :class:`ModelWarning`.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if lo > hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    if rate.family == "clipped-sigmoid":
        return float(min(rate.derivative(lo), rate.derivative(hi)))
    seg_lo, seg_hi = rate.linear_segment()
    if seg_lo < lo and hi < seg_hi:
        return rate.slope
    warnings.warn(
        f"interval [{lo}, {hi}] touches a clip point of the linear rate "
        f"(segment [{seg_lo}, {seg_hi}]); derivative infimum is 0",
        ModelWarning,
        stacklevel=2,
    )
    return 0.0
