import dataclasses
import math

import numpy as np
import pytest

from spikegraph.bounds import (
    BoundUnavailable,
    BoundValue,
    compute_constants,
    contraction_coefficient,
    coupling_bound,
    hoeffding_bound,
    lambda_matrix,
    overestimation_bound,
    row_sum_norm,
    solve_alpha0,
    solve_alpha0_from,
    theorem2_bounds,
    underestimation_bound,
)
from spikegraph.model import ModelWarning, PulseKernel, RateFunction

from .conftest import make_network

GEOM = PulseKernel("geometric", 0.5)
LINEAR = RateFunction("clipped-linear", 0.1, slope=0.1, intercept=0.5)


def linear_net():
    W = np.zeros((3, 3))
    W[1, 0] = 1.0
    W[2, 0] = -0.5
    with pytest.warns(ModelWarning, match="piecewise"):
        return make_network(W, rate=LINEAR)


def test_constants_linear_example():
    c = compute_constants(linear_net(), 0)
    assert c.K == (-0.5, 1.0)
    assert c.m == pytest.approx(0.05)
    assert c.sigma_region == 0.0
    assert c.m_region == c.m and c.K_region == c.K


def test_tail_outside_region():
    W = np.zeros((3, 3))
    W[1, 0] = 1.0
    W[2, 0] = 0.1
    c = compute_constants(make_network(W), 0, [0, 1])
    assert c.sigma_region == pytest.approx(0.1)
    assert c.neighborhood == (1, 2)


def test_empty_neighborhood_flagged():
    c = compute_constants(make_network(np.zeros((2, 2))), 0)
    assert c.m is None and c.m_region is None
    assert any("empty neighborhood" in f for f in c.flags)


def test_overestimation_examples():
    assert overestimation_bound(10**4, 0.25, 0.2) == pytest.approx(4e5 * math.exp(-2), rel=1e-12)
    assert overestimation_bound(10**4, 0.25, 0.2) == pytest.approx(5.4134e4, rel=1e-4)
    assert overestimation_bound(10**4, 0.25, 2.0) == pytest.approx(4e5 * math.exp(-200), rel=1e-12)
    assert overestimation_bound(10**4, 0.25, 1e-12) == pytest.approx(4 * (10**4) ** 1.25)


def test_overestimation_monotone():
    eps = np.linspace(0.01, 2, 100)
    vals = [overestimation_bound(1000, 0.25, e) for e in eps]
    assert np.all(np.diff(vals) < 0)
    # small eps * n^xi: grows with n
    ns = np.arange(3, 200)
    vals = [overestimation_bound(n, 0.25, 0.01) for n in ns]
    assert np.all(np.diff(vals) > 0)


def test_underestimation_examples():
    t1, _, _ = underestimation_bound(10**4, 0.25, 0.05, 0.1, 2, 0.2, 0.5)
    assert t1 == pytest.approx(4 * math.exp(-0.125), rel=1e-12)
    assert t1 == pytest.approx(3.5298, abs=1e-3)
    _, t2, valid = underestimation_bound(10**4, 0.25, 0.05, 0.1, 2, 0.2, 0.5)
    assert (t2, valid) == (1.0, False)
    with pytest.raises(ValueError):
        underestimation_bound(10**4, 0.25, 0.1, 0.1, 2, 0.2)


def test_underestimation_tail_eventually_valid():
    # q = 0.4^3 = 0.064; valid once n is large enough
    _, t2, valid = underestimation_bound(10**9, 0.05, 0.01, 0.5, 2, 0.4, 0.5)
    q = 0.4**3
    assert valid
    assert t2 == pytest.approx(math.exp(-(10**9 // 2) * q * 0.25 / 4))


def test_hoeffding_examples():
    assert hoeffding_bound(103, 1, 10) == pytest.approx(2 * math.exp(-200 / 103), rel=1e-12)
    assert hoeffding_bound(103, 1, 1e-9) == pytest.approx(2.0)
    for lam in (0.5, 3.0, 7.0):
        assert hoeffding_bound(60, 2, 2 * lam) == pytest.approx(hoeffding_bound(60, 2, lam) ** 4 / 8, rel=1e-12)
    with pytest.raises(ValueError):
        hoeffding_bound(3, 2, 1.0)


def test_alpha0_zero_when_contracting():
    W = np.array([[0.0, 0.0], [1.0, 0.0]])
    a, chi = solve_alpha0_from(0.1, 0.3, W, [GEOM, GEOM], 0, [0, 1])
    assert chi == pytest.approx(0.9)
    assert a == 0.0
    a, chi = solve_alpha0_from(1.0, 0.5, np.zeros((2, 2)), [GEOM, GEOM], 0, [0, 1])
    assert (a, chi) == (0.0, 0.5)


def test_alpha0_bisection_example():
    W = np.array([[0.0, 0.0], [1.0, 0.0]])
    pulses = [GEOM, GEOM]

    def norm(a):
        return row_sum_norm(lambda_matrix(a, 1.0, 0.5, W, pulses, 0, [0, 1]))

    assert norm(math.log(2)) == pytest.approx(0.5 / 0.75 + 0.25)
    a, chi = solve_alpha0_from(1.0, 0.5, W, pulses, 0, [0, 1])
    assert chi >= 1
    assert 0 < a <= math.log(2)
    assert norm(a) < 1 <= norm(a - 1e-3)
    assert norm(a / 2) >= 1


def test_alpha0_invariants_random(rng):
    for _ in range(30):
        N = int(rng.integers(2, 5))
        W = rng.normal(scale=2.0, size=(N, N))
        np.fill_diagonal(W, 0)
        net = make_network(W, p_star=float(rng.uniform(0.05, 0.3)), beta=float(rng.uniform(0.5, 3)), ratio=float(rng.uniform(0.1, 0.8)))
        region = [0] + [k for k in range(1, N) if rng.random() < 0.5]
        a, chi = solve_alpha0(net, 0, region)
        lam = lambda x: row_sum_norm(lambda_matrix(x, net.gamma, net.p_star, net.weights, net.spec.pulses, 0, region))
        assert chi == pytest.approx(contraction_coefficient(net.gamma, net.p_star, net.weights, net.rho))
        assert lam(a) < 1
        if a > 0:
            assert lam(a / 2) >= 1


def test_alpha0_too_strong():
    W = np.array([[0.0, 1e30], [1e30, 0.0]])
    with pytest.raises(BoundUnavailable):
        solve_alpha0_from(1.0, 0.1, W, [GEOM, GEOM], 0, [0, 1])


def test_coupling_bound_zero_tail(chain_network):
    c = compute_constants(chain_network, 1, [0, 1])
    assert c.sigma_region == 0.0
    assert coupling_bound(c, 50) == 0.0


def test_coupling_bound_contracting_branch(chain_network):
    c = dataclasses.replace(
        compute_constants(chain_network, 1), gamma=0.5, rho=(2.0, 2.0, 2.0), chi=0.8, sigma_region=0.01
    )
    assert coupling_bound(c, 50) == pytest.approx(2.5)
    assert BoundValue(coupling_bound(c, 50)).clamped == 1.0


def _hidden_chain():
    W = np.zeros((4, 4))
    W[0, 1] = 2.0
    W[1, 2] = 2.0
    W[3, 0] = 0.01
    return make_network(W)


def test_coupling_bound_monotone_in_n():
    net = _hidden_chain()
    c = compute_constants(net, 1, [0, 1, 2])
    hidden = compute_constants(net, 0, [0, 1, 2])
    assert hidden.chi >= 1 and hidden.alpha0 > 0
    for consts in (c, hidden):
        vals = [coupling_bound(consts, n) for n in range(1, 200)]
        assert np.all(np.diff(vals) >= 0)


def test_report_reduces_without_tail(chain_network):
    c = compute_constants(chain_network, 1)
    rep = theorem2_bounds(10**6, 0.25, 0.1, c)
    assert rep.coupling.raw == 0.0
    assert rep.overestimation.raw == overestimation_bound(10**6, 0.25, 0.1)
    t1, t2, valid = underestimation_bound(10**6, 0.25, 0.1, c.m_region, 3, c.p_min)
    assert rep.underestimation_term1.raw == t1
    assert rep.underestimation.raw == pytest.approx(t1 + 2 * t2)


def test_report_hidden_neuron():
    net = _hidden_chain()
    c = compute_constants(net, 0, [0, 1, 2])
    rep = theorem2_bounds(200, 0.25, 0.5, c)
    assert math.isfinite(rep.overestimation.raw) and rep.overestimation.raw > 0
    assert rep.overestimation.clamped <= 1.0
    assert not rep.underestimation.available  # V_0 lies entirely outside the region
    d = rep.to_dict()
    assert d["underestimation"]["available"] is False


def test_report_values_clamped(chain_network):
    rep = theorem2_bounds(1000, 0.25, 0.1, compute_constants(chain_network, 1))
    for name in ("overestimation", "underestimation", "hoeffding", "coupling"):
        bv = getattr(rep, name)
        assert bv.raw >= 0
        assert 0.0 <= bv.clamped <= 1.0
        assert bv.vacuous == (bv.raw >= 1)


def test_linear_clip_gives_zero_separation():
    W = np.zeros((2, 2))
    W[1, 0] = 50.0  # K = [0, 50] runs past the clip point at u = 4
    with pytest.warns(Warning):
        c = compute_constants(make_network(W, rate=LINEAR), 0)
    assert c.m == 0.0
