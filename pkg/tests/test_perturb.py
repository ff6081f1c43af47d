import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saddlewave import analytic as A
from saddlewave import landscapes as L
from saddlewave import perturb as P
from saddlewave.errors import ConfigError, DimensionMismatch, NumericalInstability


def unit_schedule(**kw):
    return P.schedule_from(1.0, 1.0, 1.0, 0.1, 1.0, 2, **kw)


def test_unit_constants():
    p = unit_schedule()
    assert p.script_F_prime == pytest.approx(2 / 81)
    assert p.kappa == 1.0 and p.theta == 0.25
    assert p.gamma == pytest.approx(0.0625) and p.s == pytest.approx(0.015625)
    assert p.eta == 1.0 and p.eta_prime == 0.25


def test_eta_is_inverse_ell():
    assert P.schedule_from(2.0, 1.0, 0.1, 0.1, 1.0, 2).eta == 0.5


def test_quartic_schedule_values():
    p = P.schedule_for(L.quartic2d(), 0.05, 0.1, x0=np.zeros(2))
    # f_gap = 0.75 from the saddle
    assert p.f_gap == pytest.approx(0.75)
    assert p.delta0 == pytest.approx(2 / (81 * 0.75) * math.sqrt(0.05**3 / 6))
    assert p.M == pytest.approx(p.r0 / p.C_r) and p.M <= 1
    assert p.T == math.ceil(4 * max(p.f_gap / p.script_F_prime, p.f_gap / (p.eta * p.eps**2)))
    assert 0 < p.r0 < 1e-20


@settings(max_examples=60, deadline=None)
@given(ell=st.floats(0.1, 100), rho=st.floats(0.01, 100), eps=st.floats(1e-4, 1.0),
       gap=st.floats(0.01, 100), n=st.integers(1, 1000),
       algo=st.sampled_from(P.ALGORITHMS))
def test_relations_hold(ell, rho, eps, gap, n, algo):
    p = P.schedule_from(ell, rho, eps, 0.1, gap, n, algorithm=algo)
    assert p.eta == pytest.approx(1 / ell)
    assert p.eta_prime == pytest.approx(1 / (4 * ell))
    assert p.kappa == pytest.approx(ell / math.sqrt(rho * eps))
    assert p.theta == pytest.approx(1 / (4 * math.sqrt(p.kappa)))
    assert p.gamma == pytest.approx(p.theta**2 / p.eta)
    assert p.s == pytest.approx(p.gamma / (4 * rho))
    assert p.M <= 1 and p.T > 0


def test_pagd_and_jordan_budgets():
    pa = P.schedule_from(1.0, 1.0, 0.1, 0.1, 1.0, 2, algorithm="pagd")
    assert pa.script_E == pytest.approx(math.sqrt(0.1**3) * 4.0**-7)
    assert pa.T == math.ceil(3 * max(1 / pa.script_F_prime, pa.script_T / pa.script_E))
    pj = P.schedule_from(1.0, 1.0, 0.1, 0.1, 1.0, 2, algorithm="jordan")
    assert pj.delta0 == pytest.approx(0.5 * pa.delta0)


def test_overrides_propagate():
    p = unit_schedule(overrides={"eta": 0.5, "r0": 0.5, "T": 7})
    assert p.eta == 0.5 and p.T == 7
    assert p.gamma == pytest.approx(p.theta**2 / 0.5)
    assert p.M == 1.0
    assert {"eta", "r0", "T"} <= p.overrides


def test_schedule_errors():
    with pytest.raises(ConfigError):
        P.schedule_from(-1.0, 1.0, 1.0, 0.1, 1.0, 2)
    with pytest.raises(ConfigError):
        P.schedule_from(1.0, 1.0, 1.0, 1.5, 1.0, 2)
    with pytest.raises(ConfigError):
        unit_schedule(overrides={"bogus": 1})
    with pytest.raises(ConfigError):
        P.schedule_for(L.quad2d(), 0.1, 0.1, f_gap=1.0)
    with pytest.raises(ConfigError):
        unit_schedule().replace(eta=0.0)


def test_replace_checks_relations_of_untouched_fields():
    p = unit_schedule()
    # gamma still follows the old theta, so the copy is rejected
    with pytest.raises(ConfigError):
        p.replace(theta=0.1)
    q = p.replace(theta=0.1, gamma=0.01, s=0.0025)
    assert {"theta", "gamma"} <= q.overrides


def test_zero_time_sample_is_isotropic():
    land = L.quad2d()
    s = P.PacketSampler(land, np.zeros(2), 0.5, 0.0)
    xs = np.array([s.offset(np.random.default_rng(i)) for i in range(4000)])
    assert np.allclose(np.cov(xs.T), 0.25 * np.eye(2), atol=0.02)


def test_analytic_sample_variance_quad2d():
    land = L.quad2d()
    s = P.PacketSampler(land, np.zeros(2), 0.5, 1.0)
    assert s.law.marginal_variance(0) == pytest.approx(0.68, abs=0.005)
    rng = np.random.default_rng(0)
    xs = np.array([s.offset(rng) for _ in range(20000)])
    assert np.var(xs[:, 0]) == pytest.approx(0.25 * A.variance_sigma2(1.0, -1.0), rel=0.03)


@pytest.mark.slow
def test_pde_sample_squeezed_on_quartic():
    land = L.quartic2d()
    pde = P.PDEOptions(mesh=128, half_width=3.0)
    s = P.PacketSampler(land, np.zeros(2), 0.5, 1.5, "pde", pde)
    rng = np.random.default_rng(1)
    xs = np.array([s.offset(rng) for _ in range(10_000)])
    assert np.median(np.abs(xs[:, 0])) / np.median(np.abs(xs[:, 1])) > 1.5


def test_quantum_sample_dispatch():
    land = L.quad2d()
    p = unit_schedule(overrides={"r0": 0.5})
    smp = P.quantum_simulation_sample(land, np.zeros(2), p, t_e=1.0, rng=np.random.default_rng(0))
    assert smp.backend == "analytic" and smp.t_e == 1.0 and np.all(np.isfinite(smp.xi))
    smp = P.quantum_simulation_sample(land, np.zeros(2), p, t_e=0.5, backend="pde",
                                      rng=np.random.default_rng(0),
                                      pde=P.PDEOptions(mesh=32, half_width=3.0))
    assert smp.grid.mesh == 32
    with pytest.raises(ConfigError):
        P.quantum_simulation_sample(land, np.zeros(2), p, backend="magic")
    with pytest.raises(DimensionMismatch):
        P.quantum_simulation_sample(land, np.zeros(3), p)


def test_gradient_tilt_keeps_packet_centred():
    # on a pure quadratic the tilted potential is the Hessian form at any anchor
    land = L.quad2d()
    x = np.array([0.7, -0.4])
    pde = P.PDEOptions(mesh=64, half_width=3.0)
    s = P.PacketSampler(land, x, 0.5, 0.5, "pde", pde)
    from saddlewave import wavesim as W
    assert abs(W.marginal_mean(s.state, 0)) < 1e-6
    assert abs(W.marginal_mean(s.state, 1)) < 1e-6


def test_perturbation_step_length():
    rng = np.random.default_rng(0)
    for _ in range(20):
        d = P.perturbation_step(rng.standard_normal(3), 1.0, 1.0)
        assert np.linalg.norm(d) == pytest.approx(2 / 3)
    assert np.linalg.norm(P.perturbation_step([1.0, 0.0], 0.01, 4.0)) == pytest.approx(
        (2 / 3) * 0.05)
    with pytest.raises(NumericalInstability):
        P.perturbation_step([0.0, 0.0], 1.0, 1.0)


def test_apply_perturbation_tie_goes_plus():
    land = L.quad2d()
    x = P.apply_perturbation(land, np.zeros(2), np.array([0.0, 1.0]), 1.0, 1.0)
    assert np.allclose(x, [0.0, 2 / 3])


def test_apply_perturbation_decrease_on_quad2d():
    land = L.quad2d()
    x = P.apply_perturbation(land, np.zeros(2), np.array([1.0, 0.0]), 1.0, 1.0)
    assert abs(x[0]) == pytest.approx(2 / 3) and x[1] == 0
    assert land(x) == pytest.approx(-2 / 9)
    assert -land(x) >= 2 / 81


def test_apply_perturbation_picks_lower_side():
    land = L.cubic2d()
    x = P.apply_perturbation(land, np.zeros(2), np.array([1.0, 1.0]), 0.3, 1.0)
    step = P.perturbation_step([1.0, 1.0], 0.3, 1.0)
    assert land(x) == min(land(step), land(-step))


def test_constant_overrides_feed_derived_values():
    base = unit_schedule()
    p = unit_schedule(overrides={"C_r": 0.2, "c_A": 2.0})
    assert p.C_r == 0.2 and p.r0 == pytest.approx(base.r0 * 8)
    assert p.script_T == pytest.approx(base.script_T / 2)
    assert p.script_E == pytest.approx(base.script_E * 2**7)
