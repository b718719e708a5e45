import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import erf

from reifflow.errors import DomainError, NumericalBlowupError, ResolutionError
from reifflow.flow_graph import (
    INTERIOR_C,
    EstimateCheck,
    GraphState,
    calibrate_interior_constant,
    checks_to_csv,
    ecker_huisken_check,
    evolve_graph,
    graph_mcf_step,
    heat_step,
    interior_curvature_experiment,
    kernel_constant_experiment,
    kink_profile,
)


def _sine(amp, h=math.pi / 64):
    return GraphState.sample(lambda x: amp * np.sin(x), math.pi, h, boundary="periodic")


# ---------------------------------------------------------------------------
# state


def test_sample_dirichlet_includes_both_ends():
    s = GraphState.sample(lambda x: x, 1.0, 0.25)
    assert s.x == pytest.approx([-1, -0.75, -0.5, -0.25, 0, 0.25, 0.5, 0.75, 1])
    assert s.at(0.0) == 4


def test_sample_periodic_drops_right_end():
    s = _sine(1.0, h=math.pi / 4)
    assert len(s.u) == 8
    assert s.x[-1] == pytest.approx(0.75 * math.pi)


@pytest.mark.parametrize("kwargs", [dict(h=0.3), dict(h=-0.1), dict(boundary="neumann")])
def test_state_rejects_bad_grids(kwargs):
    args = dict(f=lambda x: x, L=1.0, h=0.25, boundary="dirichlet")
    args.update(kwargs)
    with pytest.raises(DomainError):
        GraphState.sample(args["f"], args["L"], args["h"], args["boundary"])


def test_state_rejects_non_finite():
    with pytest.raises(NumericalBlowupError):
        GraphState(np.array([0.0, np.nan, 0.0]), 1.0, 1.0)


def test_curvature_of_parabola():
    s = GraphState.sample(lambda x: 0.5 * x**2, 1.0, 0.01)
    i = s.at(0.0)
    assert s.curvature()[i] == pytest.approx(1.0, rel=1e-9)
    j = s.at(0.5)
    assert s.curvature()[j] == pytest.approx(1.0 / 1.25**1.5, rel=1e-6)


# ---------------------------------------------------------------------------
# steppers


@pytest.mark.parametrize("step", [graph_mcf_step, heat_step])
@pytest.mark.parametrize("boundary", ["dirichlet", "periodic"])
def test_constant_is_stationary(step, boundary):
    s = GraphState.sample(lambda x: 0.0 * x + 3.0, 1.0, 0.05, boundary)
    out = step(s, 0.4 * 0.05**2)
    assert np.array_equal(out.u, s.u)
    assert out.t == pytest.approx(0.4 * 0.05**2)


def test_line_is_stationary_under_graph_flow():
    s = GraphState.sample(lambda x: x, 1.0, 0.01)
    (out,) = evolve_graph(s, 0.05)
    assert np.max(np.abs(out.u - s.u)) < 1e-12


def test_graph_flow_sine_decay():
    (out,) = evolve_graph(_sine(1e-3), 1.0)
    amp = np.max(np.abs(out.u))
    assert amp == pytest.approx(1e-3 * math.exp(-1), rel=0.01)


def test_heat_sine_decay():
    (out,) = evolve_graph(_sine(1.0), 1.0, equation="heat")
    assert np.max(np.abs(out.u)) == pytest.approx(math.exp(-1), rel=0.01)


def test_heat_step_matches_erf():
    h = 1 / 1000
    s = GraphState.sample(lambda x: np.sign(np.where(np.abs(x) < 0.5 * h, 0.0, x)), 1.0, h)
    (out,) = evolve_graph(s, 0.01, equation="heat")
    exact = erf(out.x / (2 * math.sqrt(0.01)))
    inner = np.abs(out.x) < 0.8
    assert np.max(np.abs(out.u - exact)[inner]) < 0.01


def test_heat_and_graph_flow_agree_at_small_amplitude():
    s = _sine(1e-3)
    (a,) = evolve_graph(s, 0.1, equation="heat")
    (b,) = evolve_graph(s, 0.1, equation="mcf")
    assert np.max(np.abs(a.u - b.u)) < 1e-6


def test_steppers_reject_unstable_dt():
    s = _sine(1.0, h=0.1 * math.pi)
    with pytest.raises(DomainError, match="stability"):
        heat_step(s, 0.5 * s.h**2)
    with pytest.raises(DomainError):
        graph_mcf_step(s, -1.0)
    with pytest.raises(DomainError):
        evolve_graph(s, 0.1, equation="wave")


def test_evolve_graph_hits_snapshot_times():
    out = evolve_graph(_sine(0.1), 0.3, snapshot_times=[0.1, 0.2])
    assert [s.t for s in out] == [0.1, 0.2, 0.3]


@given(
    amps=st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3),
    equation=st.sampled_from(["mcf", "heat"]),
)
def test_maximum_principles(amps, equation):
    h = math.pi / 32
    f = lambda x: sum(a * np.sin((k + 1) * x + k) for k, a in enumerate(amps))  # noqa: E731
    s = GraphState.sample(f, math.pi, h, boundary="periodic")
    sup = np.max(np.abs(s.u))
    grad = np.max(np.abs(s.ux()))
    for out in evolve_graph(s, 0.2, equation=equation, snapshot_times=[0.05, 0.1, 0.15]):
        assert np.max(np.abs(out.u)) <= sup * (1 + 1e-12) + 1e-15
        if equation == "mcf":
            assert np.max(np.abs(out.ux())) <= grad * (1 + 1e-9) + 1e-15
        sup = np.max(np.abs(out.u))
        grad = np.max(np.abs(out.ux()))


# ---------------------------------------------------------------------------
# kernel constant


def test_kernel_constant_example():
    c = kernel_constant_experiment(1.0, 1.0, 0.01)
    assert c.lhs == pytest.approx(1 / math.sqrt(0.01 * math.pi), rel=0.02)
    assert c.passed and c.status == "pass"
    assert 0 < c.margin < 0.05 * c.rhs


def test_kernel_constant_linear_in_de():
    a = kernel_constant_experiment(1.0, tau=0.01)
    b = kernel_constant_experiment(0.5, tau=0.01)
    assert b.lhs == pytest.approx(0.5 * a.lhs, rel=1e-9)


def test_kernel_constant_tau_scaling():
    a = kernel_constant_experiment(tau=0.005)
    b = kernel_constant_experiment(tau=0.02)
    assert b.lhs == pytest.approx(0.5 * a.lhs, rel=0.03)


@pytest.mark.parametrize("tau", [0.0025, 0.005, 0.01, 0.02])
def test_kernel_constant_margin_positive(tau):
    assert kernel_constant_experiment(tau=tau).margin > 0


def test_kernel_constant_preconditions():
    with pytest.raises(ResolutionError):
        kernel_constant_experiment(tau=0.01, h=0.05)
    with pytest.raises(DomainError):
        kernel_constant_experiment(tau=0.1, L=1.0, h=1 / 500)
    with pytest.raises(DomainError):
        kernel_constant_experiment(de=0.0)


def test_second_difference_converges_quadratically():
    tau, x0 = 0.01, 0.1
    exact = -x0 / (2 * math.sqrt(math.pi) * tau**1.5) * math.exp(-x0**2 / (4 * tau))
    errs = []
    for h in (1 / 200, 1 / 400):
        s = GraphState.sample(lambda x: np.sign(np.where(np.abs(x) < 0.5 * h, 0.0, x)), 1.0, h)
        (out,) = evolve_graph(s, tau, equation="heat")
        errs.append(abs(out.uxx()[out.at(x0)] - exact))
    assert errs[0] / errs[1] > 3.0


# ---------------------------------------------------------------------------
# interior curvature


def test_interior_zero_data():
    a, b = interior_curvature_experiment(u0=lambda x: 0.0 * x)
    assert a.lhs == 0.0
    assert a.passed and b.passed
    assert a.margin == a.rhs and b.margin == b.rhs


def test_interior_default_passes_check_a():
    a, b = interior_curvature_experiment(0.01, 0.001, tau=0.04, L=1.0)
    assert a.status == "pass"
    assert b.status == "pass"
    assert a.lhs <= 1.1 * 0.01 / math.sqrt(0.04 * math.pi)


def test_interior_near_linear_in_de():
    a1, _ = interior_curvature_experiment(0.01, 0.001)
    a2, _ = interior_curvature_experiment(0.02, 0.002)
    assert a2.lhs == pytest.approx(2 * a1.lhs, rel=0.1)


def test_interior_hypothesis_violation_is_inconclusive():
    # slope 3 de exceeds the allowed bound de
    a, b = interior_curvature_experiment(0.01, 0.01, u0=lambda x: 0.03 * np.clip(x, -0.3, 0.3))
    assert a.status == b.status == "inconclusive"


def test_kink_profile_bounds():
    f = kink_profile(0.01, 0.001)
    x = np.linspace(-1, 1, 2001)
    u = f(x)
    assert np.max(np.abs(u)) <= 0.001
    assert np.max(np.abs(np.diff(u))) / (x[1] - x[0]) <= 0.01 + 1e-12


def test_frozen_constant_covers_calibration():
    c = calibrate_interior_constant(family=((0.01, 0.001, 0.04), (0.02, 0.001, 0.04)))
    assert 0 <= c <= INTERIOR_C


def test_interior_preconditions():
    with pytest.raises(ResolutionError):
        interior_curvature_experiment(h=0.1)
    with pytest.raises(DomainError):
        interior_curvature_experiment(M=0.5)


# ---------------------------------------------------------------------------
# gradient estimate


def test_ecker_huisken_constant_graph():
    s = GraphState.sample(lambda x: 0.0 * x + 1.0, 2.0, 0.01)
    snaps = evolve_graph(s, 0.1, snapshot_times=[0.0])
    c = ecker_huisken_check(snaps, 1.0)
    assert c.rhs == pytest.approx(1.0)
    assert c.lhs <= 1.0 and c.passed


def test_ecker_huisken_sine_passes():
    s = _sine(0.5)
    snaps = evolve_graph(s, 0.1, snapshot_times=[0.0, 0.05])
    assert ecker_huisken_check(snaps, math.pi / 2).passed


def test_ecker_huisken_adversarial_fails():
    snaps = evolve_graph(_sine(0.5), 0.1, snapshot_times=[0.0, 0.05])
    c = ecker_huisken_check(snaps, math.pi / 2, adversarial=True)
    assert c.margin < 0 and not c.passed


def test_ecker_huisken_time_window():
    snaps = evolve_graph(_sine(0.5), 0.6, snapshot_times=[0.0])
    with pytest.raises(DomainError):
        ecker_huisken_check(snaps, 1.0)


# ---------------------------------------------------------------------------
# checks


def test_estimate_check_status():
    assert EstimateCheck(1.0, 2.0).status == "pass"
    assert EstimateCheck(2.0, 1.0).status == "fail"
    assert EstimateCheck(1.0, 1.0).passed


def test_checks_csv():
    text = checks_to_csv([EstimateCheck(1.0, 2.0, "kernel_constant", {"tau": 0.01})])
    header, row = text.splitlines()
    assert header == "experiment,param_json,lhs,rhs,margin,passed"
    assert row == 'kernel_constant,"{""tau"": 0.01}",1,2,1,True'
