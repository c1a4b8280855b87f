"""Unit conversions and physical constants.

Everything inside the package is SI (Hz, W, m, Np/m, s^2/m). Engineering
units only appear at the config and report boundary, via the helpers here.
"""
from __future__ import annotations

import numpy as np
from scipy.constants import c as C_LIGHT, h as H_PLANCK

__all__ = [
    "C_LIGHT",
    "H_PLANCK",
    "DB_PER_NEPER",
    "db_to_linear",
    "linear_to_db",
    "dbm_to_watt",
    "watt_to_dbm",
    "wavelength_to_frequency",
    "frequency_to_wavelength",
    "db_per_km_to_np_per_m",
    "np_per_m_to_db_per_km",
    "ps_per_nm_km_to_si",
    "ps_per_nm2_km_to_si",
    "per_w_km_to_si",
    "raman_slope_to_si",
]

# 10*log10(e): dB per neper of *power*
DB_PER_NEPER = 10.0 / np.log(10.0)


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("linear_to_db requires strictly positive input")
    return 10.0 * np.log10(x)


def dbm_to_watt(p_dbm):
    """Convert dBm to W: ``1e-3 * 10**(dBm/10)``."""
    return 1e-3 * db_to_linear(p_dbm)


def watt_to_dbm(p_w):
    """Convert W to dBm. Raises ``ValueError`` for non-positive powers."""
    p_w = np.asarray(p_w, dtype=float)
    if np.any(p_w <= 0):
        raise ValueError("watt_to_dbm requires strictly positive power")
    return 10.0 * np.log10(p_w / 1e-3)


def wavelength_to_frequency(wavelength_m):
    wavelength_m = np.asarray(wavelength_m, dtype=float)
    if np.any(wavelength_m <= 0):
        raise ValueError("wavelength must be positive")
    return C_LIGHT / wavelength_m


def frequency_to_wavelength(frequency_hz):
    frequency_hz = np.asarray(frequency_hz, dtype=float)
    if np.any(frequency_hz <= 0):
        raise ValueError("frequency must be positive")
    return C_LIGHT / frequency_hz


def db_per_km_to_np_per_m(alpha_db_km):
    """Power attenuation in dB/km to Np/m, so that P(z) = P(0) exp(-alpha z)."""
    return np.asarray(alpha_db_km, dtype=float) / DB_PER_NEPER / 1e3


def np_per_m_to_db_per_km(alpha_np_m):
    return np.asarray(alpha_np_m, dtype=float) * DB_PER_NEPER * 1e3


def ps_per_nm_km_to_si(d):
    """Dispersion parameter ps/(nm km) -> s/m^2."""
    return d * 1e-12 / 1e-9 / 1e3


def ps_per_nm2_km_to_si(s):
    """Dispersion slope ps/(nm^2 km) -> s/m^3."""
    return s * 1e-12 / 1e-18 / 1e3


def per_w_km_to_si(gamma):
    """Nonlinearity 1/(W km) -> 1/(W m)."""
    return gamma / 1e3


def raman_slope_to_si(cr):
    """Raman gain slope 1/(W km THz) -> 1/(W m Hz)."""
    return cr / 1e3 / 1e12
