import numpy as np
import pytest

from scl_throughput.plan import (
    AmplifierSpec,
    Band,
    CapacityError,
    FiberSpec,
    Partial,
    PlanError,
    as_power_vector,
    build_channel_plan,
    dispersion_coefficients,
)
from scl_throughput.units import C_LIGHT


def test_full_plan_counts_and_order(scl_plan):
    assert len(scl_plan) == 364
    assert np.all(np.diff(scl_plan.frequencies) > 0)
    counts = {b: int(scl_plan.band_mask(b).sum()) for b in Band}
    assert counts == {Band.S: 164, Band.C: 100, Band.L: 100}
    # lowest frequency is L, highest S
    assert scl_plan.bands[0] == "L" and scl_plan.bands[-1] == "S"


def test_plan_centered_on_center_wavelength(scl_plan):
    f = scl_plan.frequencies
    assert 0.5 * (f[0] + f[-1]) == pytest.approx(C_LIGHT / 1540e-9, rel=1e-12)
    assert scl_plan.offsets[0] == pytest.approx(-scl_plan.offsets[-1])


def test_band_gaps_match_requested_nm(scl_plan):
    lam = 1540e-9
    nm_to_hz = C_LIGHT / lam**2 * 1e-9
    f, b = scl_plan.frequencies, scl_plan.bands
    l_top = f[b == "L"].max()
    c_low, c_top = f[b == "C"].min(), f[b == "C"].max()
    s_low = f[b == "S"].min()
    assert (c_low - l_top - 50e9) / nm_to_hz == pytest.approx(5.0)
    assert (s_low - c_top - 50e9) / nm_to_hz == pytest.approx(10.0)


def test_total_bandwidth_slot_edges(c5_plan):
    assert c5_plan.total_bandwidth == pytest.approx(5 * 50e9)


def test_capacity_error_when_band_overflows():
    with pytest.raises(CapacityError):
        build_channel_plan({Band.C: 400}, 50e9, 1550e-9)


def test_invalid_plan_parameters():
    with pytest.raises(PlanError):
        build_channel_plan({Band.C: 5}, -1.0, 1550e-9)
    with pytest.raises(PlanError):
        build_channel_plan({Band.C: 5}, 50e9, 1550e-9, spacing=25e9)
    with pytest.raises(PlanError):
        build_channel_plan({}, 50e9, 1550e-9)


def test_dispersion_coefficients_independent_formula():
    d, s, lam = 17e-6, 0.057e3, 1550e-9
    beta2, beta3 = dispersion_coefficients(d, s, lam)
    # beta2 = -D lambda^2 / (2 pi c), about -21.7 ps^2/km for SSMF
    assert beta2 * 1e27 == pytest.approx(-21.68, abs=0.01)
    # beta3 from the textbook expansion (lambda^2/2pi c)^2 (S + 2D/lambda)
    expected = (lam**2 / (2 * np.pi * C_LIGHT)) ** 2 * (s + 2 * d / lam)
    assert beta3 == pytest.approx(expected)
    assert beta3 > 0


def test_fiber_validation():
    with pytest.raises(ValueError, match="span_length"):
        FiberSpec(span_length=-1.0)
    with pytest.raises(ValueError, match="raman"):
        FiberSpec(raman_slope_Cr=-1.0)


def test_fiber_alpha_broadcast_and_override():
    f = FiberSpec(attenuation=np.linspace(4e-5, 5e-5, 3))
    assert f.alpha(3).shape == (3,)
    with pytest.raises(ValueError):
        f.alpha(4)
    g = f.with_(attenuation=1e-5)
    assert np.all(g.alpha(7) == 1e-5)


def test_partial_validation():
    with pytest.raises(ValueError):
        Partial(compensation_fraction=1.5)
    with pytest.raises(ValueError):
        Partial(reset_period=0)


def test_noise_figures_per_channel(scl_plan):
    nf = AmplifierSpec().noise_figures(scl_plan)
    assert set(nf[scl_plan.bands == "S"]) == {7.0}
    assert set(nf[scl_plan.bands == "C"]) == {4.0}
    assert set(nf[scl_plan.bands == "L"]) == {6.0}


def test_power_vector_validation(c5_plan):
    assert np.all(as_power_vector(1e-3, c5_plan) == 1e-3)
    with pytest.raises(ValueError):
        as_power_vector([1e-3] * 4, c5_plan)
    with pytest.raises(ValueError):
        as_power_vector([1e-3, 1e-3, 0.0, 1e-3, 1e-3], c5_plan)
    with pytest.raises(ValueError):
        as_power_vector([1e-3, 1e-3, np.nan, 1e-3, 1e-3], c5_plan)


def test_shifted_plan_keeps_absolute_grid(c5_plan):
    moved = c5_plan.shifted(10e9)
    assert np.allclose(moved.frequencies, c5_plan.frequencies)
    assert np.allclose(moved.offsets, c5_plan.offsets - 10e9)
