import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sobolev_growth.classical_dynamics import AnalyticBasis, integrate_flow, oscillator_system
from sobolev_growth.correspondence import (ClassicalSeries, GridMismatchError, RatioSeries,
                                           band_report, classical_from_analytic, envelope_band,
                                           envelope_scale, envelope_times, predicted_norm,
                                           ratio_series, windowed_band)
from sobolev_growth.growth_rates import make_catalog_rate
from sobolev_growth.perturbation import build_phi
from sobolev_growth.quantum_evolution import QuantumHamiltonianSpec, basis_state, evolve


def test_predicted_norm_examples():
    assert predicted_norm(1, 1.0) == 1.0
    t = np.linspace(3, 50, 20)
    np.testing.assert_allclose(predicted_norm(2, np.sqrt(t)), t, rtol=1e-14)
    # z* ~ t dominates W ~ t^{1/2}
    ratio = predicted_norm(1, np.sqrt(t), t) / t
    assert np.all((ratio >= 1) & (ratio <= 1 + 1 / math.sqrt(3)))


def test_predicted_norm_rejects_negative():
    with pytest.raises(ValueError):
        predicted_norm(1, -1.0)


@given(st.floats(0.5, 4.0), st.floats(0.01, 100.0), st.floats(0.0, 100.0))
def test_predicted_norm_monotone(s, w, z):
    assert predicted_norm(s, w * 1.1, z) > predicted_norm(s, w, z)


def test_band_report_stats():
    rep = band_report([1.0, 2.0, 1.0, 4.0])
    assert (rep.min_ratio, rep.max_ratio, rep.band) == (1.0, 4.0, 4.0)
    assert rep.drift == pytest.approx(2.0)
    assert rep.passes(max_band=4.0) and not rep.passes(max_band=3.9)


def test_band_report_non_finite():
    rep = band_report([1.0, np.inf, 2.0])
    assert not rep.passes()


def test_band_report_needs_two_values():
    with pytest.raises(ValueError):
        band_report([1.0])


def test_windowed_band_selects():
    t = np.arange(10.0)
    rep = windowed_band(t, np.where(t < 5, 100.0, 1.0), 5.0)
    assert rep.band == 1.0 and rep.count == 5


def test_ratio_series_rejects_bad_inputs():
    t = np.array([0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        RatioSeries(t[::-1], np.ones(3), np.ones(3), 0.0, 1.0)
    with pytest.raises(ValueError):
        RatioSeries(t, np.array([1.0, 0.0, 1.0]), np.ones(3), 0.0, 1.0)


@pytest.fixture(scope="module")
def qho_pair():
    t0 = math.pi / 2
    flow = integrate_flow(oscillator_system(), t0, t0 + 20, sample_step=0.1)
    spec = QuantumHamiltonianSpec(lambda t: np.zeros_like(t), N=64, dt=1e-2)
    traj = evolve(basis_state(0, 64, t0), spec, t0 + 20, sample_step=0.1, keep_states=True)
    return flow, traj


def test_qho_ratio_constant(qho_pair):
    flow, traj = qho_pair
    rs, rep = ratio_series(flow, traj, 1.0, flow.t0)
    np.testing.assert_allclose(rs.ratio, math.sqrt(1.5), rtol=1e-6)
    assert rep.band - 1 <= 1e-6


def test_ratio_series_accepts_state_list(qho_pair):
    flow, traj = qho_pair
    a, _ = ratio_series(flow, traj, 2.0, flow.t0)
    b, _ = ratio_series(flow, traj.states, 2.0, flow.t0)
    np.testing.assert_allclose(a.ratio, b.ratio, rtol=1e-15)


def test_grid_mismatch(qho_pair):
    flow, traj = qho_pair
    shifted = ClassicalSeries(flow.times + 1e-6, flow.W_norm, flow.zstar_norm)
    with pytest.raises(GridMismatchError):
        ratio_series(shifted, traj, 1.0, flow.t0)
    short = ClassicalSeries(flow.times[:-1], flow.W_norm[:-1], flow.zstar_norm[:-1])
    with pytest.raises(GridMismatchError):
        ratio_series(short, traj, 1.0, flow.t0)


def test_ratio_scale_covariant(qho_pair):
    flow, traj = qho_pair
    scaled = [st.scaled(2.0) for st in traj.states]
    a, _ = ratio_series(flow, traj, 1.0, flow.t0)
    b, _ = ratio_series(flow, scaled, 1.0, flow.t0)
    np.testing.assert_allclose(b.ratio, 2 * a.ratio, rtol=1e-14)


def test_analytic_series_matches_flow():
    rate = make_catalog_rate("power_log", (1, 1, 0))
    t0 = rate.t0
    flow = integrate_flow(oscillator_system(build_phi(rate)), t0, t0 + 30, sample_step=0.5)
    cl = classical_from_analytic(AnalyticBasis(rate), flow.times)
    np.testing.assert_allclose(cl.W_norm, flow.W_norm, rtol=1e-6)


def test_linear_rate_short_window_band():
    rate = make_catalog_rate("power_log", (1, 1, 0))
    t0 = rate.t0
    flow = integrate_flow(oscillator_system(build_phi(rate)), t0, t0 + 40, sample_step=0.1)
    traj = evolve(basis_state(0, 256, t0), QuantumHamiltonianSpec(build_phi(rate)), t0 + 40,
                  s_values=(2.0,))
    _, rep = ratio_series(flow, traj, 2.0, t0 + 10)
    assert rep.passes(max_band=10.0, max_drift=2.0)


def test_envelope_times():
    low = envelope_times("low", 1.0, 1000.0)
    np.testing.assert_allclose(low, (np.arange(1, 11) * math.pi) ** 2)
    high = envelope_times("high", 1.0, 1000.0)
    np.testing.assert_allclose(high, ((np.arange(0, 10) + 0.5) * math.pi) ** 2)
    assert np.all(np.abs(np.sin(np.sqrt(low))) < 1e-12)
    assert np.allclose(np.sin(np.sqrt(high)) ** 2, 1.0)


def test_envelope_scale():
    t = np.array([10.0, 100.0])
    np.testing.assert_allclose(envelope_scale("low", t, 2.0), t ** (1 / 3))
    np.testing.assert_allclose(envelope_scale("high", t, 2.0), t ** (1 / 3) * np.log(t))


def test_envelope_band_exact_law():
    t = np.linspace(5, 2000, 40001)
    values = 3.0 * envelope_scale("high", t, 1.0)
    rep = envelope_band(t, values, 1.0, "high", 5, 2000)
    assert rep.band == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        envelope_band(t, values, 1.0, "low", 5, 20)
