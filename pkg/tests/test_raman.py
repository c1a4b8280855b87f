import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from scl_throughput.plan import Band, build_channel_plan
from scl_throughput.raman import (
    PowerProfile,
    RamanFitError,
    RamanIntegrationError,
    attenuation_db,
    effective_length,
    end_of_span,
    fit_effective_cr,
    first_order_profile,
    net_gain_db,
    solve_raman_ode,
)
from scl_throughput.units import dbm_to_watt


@pytest.fixture(scope="module")
def wide_plan():
    return build_channel_plan({Band.C: 20}, 500e9, 1550e-9, band_edges_nm={Band.C: (1480.0, 1620.0)})


def test_lossless_total_power_conserved(wide_plan, fiber, rng):
    launch = dbm_to_watt(rng.uniform(-5, 10, len(wide_plan)))
    prof = solve_raman_ode(wide_plan, launch, fiber.with_(attenuation=0.0))
    total = prof.powers.sum(axis=1)
    assert np.max(np.abs(total / total[0] - 1)) <= 1e-6


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-10.0, 10.0), min_size=20, max_size=20))
def test_conservation_property(wide_plan, fiber, dbm):
    prof = solve_raman_ode(wide_plan, dbm_to_watt(np.array(dbm)), fiber.with_(attenuation=0.0), n_z=5)
    total = prof.powers.sum(axis=1)
    assert np.max(np.abs(total / total[0] - 1)) <= 1e-6


def test_uniform_loss_matches_exact_tilt_solution(c100_plan, fiber):
    # with one attenuation for all channels the exponential tilt solves the ODE exactly
    launch = np.full(len(c100_plan), dbm_to_watt(3.0))
    prof = solve_raman_ode(c100_plan, launch, fiber, n_z=8)
    for z, row in zip(prof.z, prof.powers):
        exact = first_order_profile(c100_plan, launch, fiber, fiber.raman_slope_Cr, z)
        assert np.max(np.abs(10 * np.log10(row / exact))) < 1e-6


def test_rk4_against_adaptive_integrator_with_per_channel_loss(fiber):
    plan = build_channel_plan({Band.C: 12}, 400e9, 1550e-9, band_edges_nm={Band.C: (1500.0, 1600.0)})
    alpha = np.linspace(3.5e-5, 4.5e-5, len(plan))
    fib = fiber.with_(attenuation=alpha)
    launch = dbm_to_watt(np.linspace(8, 2, len(plan)))
    f = plan.frequencies

    def rhs(_, p):
        return -alpha * p - fib.raman_slope_Cr * p * (f * p.sum() - np.dot(f, p))

    ref = solve_ivp(rhs, (0, fib.span_length), launch, method="DOP853", rtol=1e-11, atol=1e-20)
    ours = end_of_span(plan, launch, fib)
    assert np.allclose(ours, ref.y[:, -1], rtol=1e-8, atol=0)


def test_no_raman_is_pure_attenuation(c5_plan, fiber):
    fib = fiber.with_(raman_slope_Cr=0.0)
    out = end_of_span(c5_plan, 1e-3, fib)
    assert np.allclose(out, 1e-3 * np.exp(-fib.alpha(5) * fib.span_length), rtol=1e-12)


def test_power_flows_to_lower_frequencies(c100_plan, fiber):
    prof = solve_raman_ode(c100_plan, dbm_to_watt(2.0), fiber, n_z=3)
    gain = net_gain_db(prof)
    assert np.all(np.diff(gain) < 0)
    assert np.allclose(gain.mean(), -attenuation_db(fiber, 1)[0], atol=0.5)


def test_first_order_within_tenth_db_for_c_band(c100_plan, fiber):
    launch = np.full(len(c100_plan), 1e-3)
    prof = solve_raman_ode(c100_plan, launch, fiber, n_z=2)
    model = first_order_profile(c100_plan, launch, fiber, fiber.raman_slope_Cr, fiber.span_length)
    assert np.max(np.abs(10 * np.log10(model / prof.end))) <= 0.1


def test_fit_reproduces_numeric_end_powers(scl_plan, fiber, rng):
    launch = dbm_to_watt(rng.uniform(-5, -1, len(scl_plan)))
    alpha = np.linspace(3.6e-5, 4.0e-5, len(scl_plan))
    fib = fiber.with_(attenuation=alpha)
    end = end_of_span(scl_plan, launch, fib)
    fit = fit_effective_cr(end, scl_plan, launch, fib)
    assert 0 < fit.global_cr_hat < 4 * fib.raman_slope_Cr
    rebuilt = first_order_profile(
        scl_plan, launch, fib, fit.per_channel_cr_hat, fib.span_length, reference_cr=fit.global_cr_hat
    )
    far = np.abs(scl_plan.offsets) >= 100e9
    assert np.allclose(rebuilt[far], end[far], rtol=1e-9)


def test_fit_of_exact_profile_recovers_cr(c100_plan, fiber):
    launch = np.full(len(c100_plan), dbm_to_watt(2.0))
    end = end_of_span(c100_plan, launch, fiber)
    fit = fit_effective_cr(end, c100_plan, launch, fiber)
    assert fit.global_cr_hat == pytest.approx(fiber.raman_slope_Cr, rel=1e-5)
    assert np.allclose(fit.per_channel_cr_hat, fiber.raman_slope_Cr, rtol=1e-4)
    assert fit.fit_residual_db < 1e-5


def test_fit_rejects_unbracketed_slope(c100_plan, fiber):
    launch = np.full(len(c100_plan), dbm_to_watt(2.0))
    end = end_of_span(c100_plan, launch, fiber)
    with pytest.raises(RamanFitError):
        fit_effective_cr(end, c100_plan, launch, fiber, search_factor=0.5)


def test_integration_failure_names_channel(c5_plan, fiber):
    fib = fiber.with_(raman_slope_Cr=1e-9, attenuation=0.0)
    with pytest.raises(RamanIntegrationError, match="channel"):
        solve_raman_ode(c5_plan, 10.0, fib, n_z=2, step=fib.span_length)


def test_profile_csv_round_trip(c5_plan, fiber, tmp_path):
    prof = solve_raman_ode(c5_plan, 1e-3, fiber, n_z=11)
    prof.to_csv(tmp_path / "p.csv")
    back = PowerProfile.from_csv(tmp_path / "p.csv")
    assert np.array_equal(back.z, prof.z)
    assert np.array_equal(back.powers, prof.powers)
    header = (tmp_path / "p.csv").read_text().splitlines()[0]
    assert header == "z_m,ch0,ch1,ch2,ch3,ch4"


def test_effective_length_limits():
    assert effective_length(0.0, 1000.0) == pytest.approx(1000.0)
    assert effective_length(1e-3, 1e6) == pytest.approx(1e3)


def test_full_band_solve_is_fast(scl_plan, fiber):
    solve_raman_ode(scl_plan, 1e-3, fiber, n_z=2)
    t0 = time.perf_counter()
    solve_raman_ode(scl_plan, 1e-3, fiber)
    assert time.perf_counter() - t0 < 1.0


def test_single_channel_fit_keeps_nominal_slope(fiber):
    plan = build_channel_plan({Band.C: 1}, 50e9, 1550e-9)
    p0 = np.array([1e-3])
    fit = fit_effective_cr(end_of_span(plan, p0, fiber), plan, p0, fiber)
    assert fit.global_cr_hat == fiber.raman_slope_Cr
    assert fit.fit_residual_db < 1e-9
