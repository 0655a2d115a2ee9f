"""
Closed-form error bounds and model constants.

All bound functions return raw values; :class:`BoundValue` carries the raw
value together with its clamp to ``[0, 1]`` and a vacuity flag. Operator
norms on the finite index set are maximum absolute row sums.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import (
    ModelWarning,
    PulseKernel,
    ValidatedNetwork,
    rate_derivative_inf,
    true_neighborhood,
)

NORM_TARGET = 1.0 - 1e-6
ALPHA_MAX = 64.0


class BoundUnavailable(ValueError):
    pass


@dataclass(frozen=True)
class BoundValue:
    raw: float | None
    available: bool = True
    note: str = ""

    @property
    def clamped(self) -> float | None:
        if self.raw is None:
            return None
        return min(1.0, max(0.0, self.raw))

    @property
    def vacuous(self) -> bool:
        return self.raw is None or self.raw >= 1.0

    def to_dict(self) -> dict:
        return {
            "raw": self.raw,
            "clamped": self.clamped,
            "vacuous": self.vacuous,
            "available": self.available,
            "note": self.note,
        }


def _unavailable(note: str) -> BoundValue:
    return BoundValue(None, False, note)


@dataclass(frozen=True)
class ModelConstants:
    target: int
    region: tuple[int, ...]
    neighborhood: tuple[int, ...]
    K: tuple[float, float]
    m: float | None
    K_region: tuple[float, float]
    m_region: float | None
    sigma_region: float
    gamma: float
    r: float
    p_star: float
    p_min: float
    q_star: float
    rho: tuple[float, ...]
    chi: float
    alpha0: float | None
    lambda_norm: float | None
    envelope_mass: float | None
    flags: tuple[str, ...] = field(default=())

    @property
    def rho_max(self) -> float:
        return max(self.rho)

    def to_dict(self) -> dict:
        return asdict(self)


# --- selection and martingale tail bounds ---------------------------------------


def overestimation_bound(n: float, xi: float, eps: float) -> float:
    """``4 n^(3/2 - xi) exp(-eps^2 n^(2 xi) / 2)``."""
    return 4.0 * n ** (1.5 - xi) * math.exp(-(eps**2) * n ** (2 * xi) / 2.0)


def underestimation_bound(
    n: int, xi: float, eps: float, m: float, F_size: int, p_min: float, nu: float = 0.5
) -> tuple[float, float, bool]:
    """Return ``(term1, term2, valid)``.

    ``term1 = 4 exp(-(m - eps)^2 n^(2 xi) / 2)``. ``term2`` is the explicit
    tail ``exp(-floor(n/2) q (1 - nu)^2 / 4)`` with ``q = p_min^(F_size + 1)``,
    valid only once both ``nu q floor(n/2)`` and ``floor(n/2) q (1-nu)^2 / 4``
    exceed ``n^(1/2 + xi)``; otherwise ``term2 = 1`` and ``valid`` is False.
    """
    if not 0 < eps < m:
        raise ValueError(f"need 0 < eps < m, got eps={eps}, m={m}")
    if not 0 < nu < 1:
        raise ValueError(f"nu must lie in (0, 1), got {nu}")
    term1 = 4.0 * math.exp(-((m - eps) ** 2) * n ** (2 * xi) / 2.0)
    q = p_min ** (F_size + 1)
    half = n // 2
    rate = half * q * (1.0 - nu) ** 2 / 4.0
    level = n ** (0.5 + xi)
    valid = nu * q * half > level and rate > level
    term2 = math.exp(-rate) if valid else 1.0
    return term1, term2, valid


def hoeffding_bound(t: int, ell: int, lam: float) -> float:
    """``2 exp(-2 lam^2 / (t - ell + 1))`` for the centred count of one context."""
    if t <= ell + 1:
        raise ValueError(f"need t > ell + 1, got t={t}, ell={ell}")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return 2.0 * math.exp(-2.0 * lam**2 / (t - ell + 1))


# --- operator Lambda(alpha), chi, alpha0 -------------------------------------


def lambda_matrix(
    alpha: float,
    gamma: float,
    p_star: float,
    weights: np.ndarray,
    pulses: Sequence[PulseKernel],
    i: int,
    region: Iterable[int],
) -> np.ndarray:
    """``sum_t exp(-alpha t) H(t)`` with the proof-consistent ``H``.

    Every row carries the self term ``(1 - p*) exp(-alpha)``; off-diagonal
    entries are ``gamma |W[k, j]| G_k(alpha)``, where for row ``i`` only
    ``k`` in ``V_i ∩ F`` contribute.
    """
    absW = np.abs(np.asarray(weights, dtype=float))
    N = absW.shape[0]
    G = np.array([g.discounted_mass(alpha) for g in pulses])
    with np.errstate(invalid="ignore"):
        L = gamma * absW.T * G[None, :]
    L[absW.T == 0] = 0.0
    keep = np.zeros(N, dtype=bool)
    keep[list(region)] = True
    L[i, ~keep] = 0.0
    L[np.diag_indices(N)] += (1.0 - p_star) * math.exp(-alpha)
    return L


def row_sum_norm(M: np.ndarray) -> float:
    return float(np.abs(M).sum(axis=1).max())


def contraction_coefficient(gamma: float, p_star: float, weights, rho: Sequence[float]) -> float:
    """``(1 - p*) + gamma sup_j sum_k rho_k |W[k, j]|``."""
    absW = np.abs(np.asarray(weights, dtype=float))
    rho = np.asarray(rho, dtype=float)
    with np.errstate(invalid="ignore"):
        terms = np.where(absW > 0, absW * rho[:, None], 0.0)
    return (1.0 - p_star) + gamma * float(terms.sum(axis=0).max())


def solve_alpha0_from(
    gamma: float,
    p_star: float,
    weights,
    pulses: Sequence[PulseKernel],
    i: int,
    region: Iterable[int],
    rho: Sequence[float] | None = None,
    tol: float = 1e-12,
) -> tuple[float, float]:
    """Return ``(alpha0, chi)`` from explicit constants.

    ``alpha0 = 0`` when ``chi < 1``; otherwise the smallest ``alpha`` in
    ``[0, 64]`` with ``|||Lambda(alpha)||| <= 1 - 1e-6``, found by bisection.
    """
    region = list(region)
    if rho is None:
        rho = [g.mass()[0] for g in pulses]
    chi = contraction_coefficient(gamma, p_star, weights, rho)
    if chi < 1.0:
        return 0.0, chi

    def norm(a):
        return row_sum_norm(lambda_matrix(a, gamma, p_star, weights, pulses, i, region))

    if math.isfinite(norm(0.0)) and norm(0.0) <= NORM_TARGET:
        return 0.0, chi
    lo, hi = 0.0, ALPHA_MAX
    if norm(hi) > NORM_TARGET:
        raise BoundUnavailable("network too strongly coupled for the bound")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if norm(mid) <= NORM_TARGET:
            hi = mid
        else:
            lo = mid
    return hi, chi


def solve_alpha0(network: ValidatedNetwork, i: int, region: Iterable[int]) -> tuple[float, float]:
    if not all(math.isfinite(r) for r in network.rho):
        raise BoundUnavailable("a pulse kernel has infinite mass")
    return solve_alpha0_from(
        network.gamma, network.p_star, network.weights, network.spec.pulses, i, region, network.rho
    )


def envelope_discounted_mass(pulses: Sequence[PulseKernel], alpha: float) -> float:
    """Upper estimate of ``sum_t exp(-alpha t) sup_j g_j(t)``."""
    uniq = set(pulses)
    if len(uniq) == 1:
        return next(iter(uniq)).discounted_mass(alpha)
    if alpha <= 0:
        raise ValueError("envelope of heterogeneous kernels needs alpha > 0")
    T = int(min(1e6, 50.0 / alpha + 100))
    t = np.arange(1, T + 1, dtype=float)
    env = np.max([g(t) for g in uniq], axis=0)
    head = float(np.sum(np.exp(-alpha * t) * env))
    nxt = max(g(T + 1.0) for g in uniq)
    return head + nxt * math.exp(-alpha * (T + 1)) / (1.0 - math.exp(-alpha))


# --- constants ----------------------------------------------------------------


def _interval_and_sep(network: ValidatedNetwork, i: int, sources: Sequence[int]):
    W = network.weights
    pulses = network.spec.pulses
    lo = sum(W[j, i] * pulses[j](1) for j in sources if W[j, i] < 0)
    hi = sum(W[j, i] * pulses[j](1) for j in sources if W[j, i] > 0)
    K = (float(lo), float(hi))
    if not sources:
        return K, None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ModelWarning)
        d = rate_derivative_inf(network.spec.rates[i], K)
    for w in caught:
        warnings.warn(w.message, ModelWarning, stacklevel=3)
    sep = min(abs(W[j, i]) * pulses[j](1) for j in sources)
    return K, float(d * sep)


def compute_constants(network: ValidatedNetwork, i: int, region: Iterable[int] | None = None) -> ModelConstants:
    """Constants governing the error bounds for target ``i`` observed on ``region``."""
    N = network.neuron_count
    region = tuple(sorted(set(range(N) if region is None else (int(k) for k in region))))
    if i not in region:
        raise ValueError(f"target {i} not in region {region}")
    flags = []
    V = sorted(true_neighborhood(network, i))
    VF = [j for j in V if j in region]
    K, m = _interval_and_sep(network, i, V)
    K_F, m_F = _interval_and_sep(network, i, VF)
    if m is None:
        flags.append("empty neighborhood: m undefined")
    if m_F is None:
        flags.append("neighborhood disjoint from region: m_region undefined")
    W = network.weights
    sigma = float(sum(abs(W[j, i]) for j in range(N) if j not in VF))
    chi = contraction_coefficient(network.gamma, network.p_star, W, network.rho)
    alpha0 = lam_norm = env = None
    try:
        alpha0, chi = solve_alpha0(network, i, region)
        lam_norm = row_sum_norm(
            lambda_matrix(alpha0, network.gamma, network.p_star, W, network.spec.pulses, i, region)
        )
        if alpha0 > 0:
            env = envelope_discounted_mass(network.spec.pulses, alpha0)
    except BoundUnavailable as exc:
        flags.append(str(exc))
    return ModelConstants(
        target=i,
        region=region,
        neighborhood=tuple(V),
        K=K,
        m=m,
        K_region=K_F,
        m_region=m_F,
        sigma_region=sigma,
        gamma=network.gamma,
        r=network.r,
        p_star=network.p_star,
        p_min=network.p_min,
        q_star=network.p_min ** (len(region) + 1),
        rho=network.rho,
        chi=chi,
        alpha0=alpha0,
        lambda_norm=lam_norm,
        envelope_mass=env,
        flags=tuple(flags),
    )


# --- coupling and full reports -------------------------------------------------


def coupling_bound(constants: ModelConstants, n: int) -> float:
    """Bound on P(the process and its fixed-range approximation differ at the
    target before time ``n``).

    With ``chi < 1``: ``gamma rho n Sigma / (1 - chi)``. Otherwise
    ``gamma C ||g~||_1 exp(alpha0 n) Sigma / (1 - exp(-alpha0))`` with
    ``C = 1 / (1 - |||Lambda(alpha0)|||)``.
    """
    c = constants
    if c.sigma_region == 0.0:
        return 0.0
    if c.chi < 1.0:
        return c.gamma * c.rho_max * n * c.sigma_region / (1.0 - c.chi)
    if c.alpha0 is None or c.alpha0 == 0.0 or c.envelope_mass is None:
        raise BoundUnavailable("coupling bound unavailable: chi >= 1 without a positive alpha0")
    C = 1.0 / (1.0 - c.lambda_norm)
    growth = math.exp(min(c.alpha0 * n, 700.0))
    return c.gamma * C * c.envelope_mass * growth * c.sigma_region / (1.0 - math.exp(-c.alpha0))


@dataclass(frozen=True)
class BoundReport:
    n: int
    xi: float
    eps: float
    nu: float
    constants: ModelConstants
    overestimation: BoundValue
    underestimation_term1: BoundValue
    underestimation_term2: BoundValue
    underestimation_valid: bool
    underestimation: BoundValue
    hoeffding: BoundValue
    coupling: BoundValue

    def to_dict(self) -> dict:
        out = {"inputs": {"n": self.n, "xi": self.xi, "eps": self.eps, "nu": self.nu}}
        out["constants"] = self.constants.to_dict()
        for name in (
            "overestimation",
            "underestimation_term1",
            "underestimation_term2",
            "underestimation",
            "hoeffding",
            "coupling",
        ):
            out[name] = getattr(self, name).to_dict()
        out["underestimation_valid"] = self.underestimation_valid
        return out


def theorem2_bounds(n: int, xi: float, eps: float, constants: ModelConstants, nu: float = 0.5) -> BoundReport:
    """Evaluate every bound for one target, adding the coupling correction.

    With an empty tail (``V_i`` inside the region) the coupling term vanishes
    and the report holds the fully observed bounds. The underestimation total
    counts the frequency term once for each of the two witness contexts.
    """
    c = constants
    try:
        coup = BoundValue(coupling_bound(c, n))
    except BoundUnavailable as exc:
        coup = _unavailable(str(exc))
    over_raw = overestimation_bound(n, xi, eps)
    if coup.available:
        over = BoundValue(over_raw + coup.raw)
    else:
        over = BoundValue(None, False, coup.note)

    valid = False
    if not c.neighborhood or c.m_region is None:
        why = "neighborhood does not meet the region"
        t1 = t2 = under = _unavailable(why)
    elif not 0 < eps < c.m_region:
        why = f"requires 0 < eps < m_region = {c.m_region}"
        t1 = t2 = under = _unavailable(why)
    else:
        a, b, valid = underestimation_bound(n, xi, eps, c.m_region, len(c.region), c.p_min, nu)
        t1 = BoundValue(a)
        t2 = BoundValue(b, True, "" if valid else "visit-frequency tail not yet in force; set to 1")
        if coup.available:
            under = BoundValue(a + 2.0 * b + coup.raw)
        else:
            under = BoundValue(None, False, coup.note)

    ell = 1
    lam = eps * n ** (0.5 + xi)
    hoeff = BoundValue(hoeffding_bound(n, ell, lam)) if n > ell + 1 else _unavailable("n too small")
    return BoundReport(n, xi, eps, nu, c, over, t1, t2, valid, under, hoeff, coup)
