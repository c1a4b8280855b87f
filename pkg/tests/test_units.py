import numpy as np
import pytest

from scl_throughput import units


def test_db_linear_round_trip():
    x = np.array([-30.0, 0.0, 3.0, 17.5])
    assert np.allclose(units.linear_to_db(units.db_to_linear(x)), x)


def test_dbm_to_watt_reference_points():
    assert units.dbm_to_watt(0.0) == pytest.approx(1e-3)
    assert units.dbm_to_watt(30.0) == pytest.approx(1.0)
    assert units.watt_to_dbm(1e-3) == pytest.approx(0.0)


def test_watt_to_dbm_rejects_non_positive():
    with pytest.raises(ValueError):
        units.watt_to_dbm(0.0)


def test_wavelength_frequency_round_trip():
    f = units.wavelength_to_frequency(1550e-9)
    assert f == pytest.approx(193.414e12, rel=1e-5)
    assert units.frequency_to_wavelength(f) == pytest.approx(1550e-9)


def test_attenuation_conversion():
    # 0.2 dB/km is 0.2 / (10 log10 e) / 1000 Np/m
    alpha = units.db_per_km_to_np_per_m(0.2)
    assert alpha == pytest.approx(0.2 * np.log(10) / 10 / 1e3)
    assert units.np_per_m_to_db_per_km(alpha) == pytest.approx(0.2)


def test_si_scalings():
    assert units.ps_per_nm_km_to_si(17.0) == pytest.approx(17e-12 / 1e-9 / 1e3)
    assert units.ps_per_nm2_km_to_si(0.067) == pytest.approx(0.067e-12 / 1e-18 / 1e3)
    assert units.per_w_km_to_si(1.3) == pytest.approx(1.3e-3)
    assert units.raman_slope_to_si(0.028) == pytest.approx(0.028 / 1e3 / 1e12)
