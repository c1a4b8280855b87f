"""Channel plans and the physical description of a fiber link."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .units import (
    C_LIGHT,
    db_per_km_to_np_per_m,
    frequency_to_wavelength,
    per_w_km_to_si,
    ps_per_nm2_km_to_si,
    ps_per_nm_km_to_si,
    raman_slope_to_si,
    wavelength_to_frequency,
)


class PlanError(ValueError):
    """Invalid channel plan request."""


class CapacityError(PlanError):
    """Channels do not fit inside the band edges."""


class Band(str, enum.Enum):
    S = "S"
    C = "C"
    L = "L"


# ordered by increasing wavelength
BAND_ORDER = (Band.S, Band.C, Band.L)

DEFAULT_BAND_EDGES_NM: dict[Band, tuple[float, float]] = {
    Band.S: (1450.0, 1530.0),
    Band.C: (1530.0, 1578.0),
    Band.L: (1578.0, 1630.0),
}
DEFAULT_GAPS_NM: dict[tuple[Band, Band], float] = {
    (Band.S, Band.C): 10.0,
    (Band.C, Band.L): 5.0,
}
DEFAULT_CHANNELS_PER_BAND: dict[Band, int] = {Band.S: 164, Band.C: 100, Band.L: 100}


@dataclass(frozen=True)
class Channel:
    index: int
    abs_frequency: float
    offset_frequency: float
    bandwidth: float
    band: Band
    modulation_id: str


@dataclass(frozen=True, eq=False)
class ChannelPlan:
    """Ordered WDM grid. Channels are sorted by ascending absolute frequency."""

    channels: tuple[Channel, ...]
    center_frequency: float

    def __post_init__(self):
        if not self.channels:
            raise PlanError("a channel plan needs at least one channel")
        f = np.array([ch.abs_frequency for ch in self.channels])
        b = np.array([ch.bandwidth for ch in self.channels])
        if np.any(b <= 0):
            raise PlanError("channel bandwidths must be positive")
        if np.any(np.diff(f) < 0.5 * (b[1:] + b[:-1]) * (1 - 1e-12)):
            raise PlanError("channel spectra overlap or are not sorted by frequency")

    def __len__(self):
        return len(self.channels)

    @cached_property
    def frequencies(self) -> np.ndarray:
        return np.array([ch.abs_frequency for ch in self.channels])

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.array([ch.offset_frequency for ch in self.channels])

    @cached_property
    def bandwidths(self) -> np.ndarray:
        return np.array([ch.bandwidth for ch in self.channels])

    @cached_property
    def bands(self) -> np.ndarray:
        return np.array([ch.band.value for ch in self.channels])

    @cached_property
    def modulation_ids(self) -> tuple[str, ...]:
        return tuple(ch.modulation_id for ch in self.channels)

    @property
    def wavelengths(self) -> np.ndarray:
        return frequency_to_wavelength(self.frequencies)

    @property
    def total_bandwidth(self) -> float:
        """Occupied optical bandwidth from the lowest to the highest slot edge."""
        f, b = self.frequencies, self.bandwidths
        return float(f[-1] + b[-1] / 2 - (f[0] - b[0] / 2))

    def band_mask(self, band: Band | str) -> np.ndarray:
        return self.bands == Band(band).value

    def present_bands(self) -> list[Band]:
        return [band for band in BAND_ORDER if self.band_mask(band).any()]

    def shifted(self, delta_f: float) -> "ChannelPlan":
        """Same absolute grid, offsets taken against ``center + delta_f``."""
        return ChannelPlan(
            channels=tuple(
                Channel(
                    ch.index,
                    ch.abs_frequency,
                    ch.offset_frequency - delta_f,
                    ch.bandwidth,
                    ch.band,
                    ch.modulation_id,
                )
                for ch in self.channels
            ),
            center_frequency=self.center_frequency + delta_f,
        )


def build_channel_plan(
    channels_per_band: Mapping[Band | str, int],
    symbol_rate: float,
    center_wavelength: float,
    gaps_nm: Mapping[tuple[Band | str, Band | str], float] | None = None,
    band_edges_nm: Mapping[Band | str, tuple[float, float]] | None = None,
    spacing: float | None = None,
    modulation_ids: Mapping[Band | str, str] | None = None,
) -> ChannelPlan:
    """Lay out contiguous fixed-grid bands with spectral gaps between them.

    Channels are placed on a ``spacing`` grid (default: the symbol rate, i.e.
    Nyquist slots) inside each band. Between two adjacent populated bands an
    empty gap is inserted whose width in nm is converted to Hz at the center
    wavelength. The whole grid is then translated so that the mean of the two
    extreme channel frequencies equals ``c / center_wavelength``.
    """
    if symbol_rate <= 0:
        raise PlanError("symbol rate must be positive")
    if center_wavelength <= 0:
        raise PlanError("center wavelength must be positive")
    spacing = symbol_rate if spacing is None else spacing
    if spacing < symbol_rate:
        raise PlanError("channel spacing smaller than the symbol rate")

    counts = {Band(k): int(v) for k, v in channels_per_band.items()}
    if any(v < 0 for v in counts.values()):
        raise PlanError("negative channel count")
    gaps = {(Band(a), Band(b)): float(g) for (a, b), g in (gaps_nm or DEFAULT_GAPS_NM).items()}
    edges = {Band(k): v for k, v in (band_edges_nm or DEFAULT_BAND_EDGES_NM).items()}
    mods = {Band(k): v for k, v in (modulation_ids or {}).items()}

    f_center = float(wavelength_to_frequency(center_wavelength))
    nm_to_hz = C_LIGHT / center_wavelength**2 * 1e-9

    # relative positions, lowest frequency (L) first
    positions: list[float] = []
    labels: list[Band] = []
    pos = 0.0
    pending_gap = 0.0
    for band in reversed(BAND_ORDER):
        if positions:
            pending_gap += _gap_to_longer(band, gaps)
        n = counts.get(band, 0)
        if n == 0:
            continue
        if positions:
            pos += spacing + pending_gap * nm_to_hz
            pending_gap = 0.0
        for k in range(n):
            if k:
                pos += spacing
            positions.append(pos)
            labels.append(band)
    if not positions:
        raise PlanError("no channels requested")

    rel = np.array(positions)
    offsets = rel - 0.5 * (rel[0] + rel[-1])
    freqs = f_center + offsets

    for band in set(labels):
        if band not in edges:
            raise CapacityError(f"no band edges for band {band.value}")
        lo_nm, hi_nm = edges[band]
        f_lo = C_LIGHT / (hi_nm * 1e-9)
        f_hi = C_LIGHT / (lo_nm * 1e-9)
        sel = np.array([lab is band for lab in labels])
        slot_lo = freqs[sel].min() - symbol_rate / 2
        slot_hi = freqs[sel].max() + symbol_rate / 2
        if slot_lo < f_lo or slot_hi > f_hi:
            raise CapacityError(
                f"{int(sel.sum())} channels of band {band.value} span "
                f"{C_LIGHT / slot_hi * 1e9:.2f}-{C_LIGHT / slot_lo * 1e9:.2f} nm, "
                f"outside the band edges {lo_nm}-{hi_nm} nm"
            )

    channels = tuple(
        Channel(i, float(f), float(o), float(symbol_rate), lab, mods.get(lab, lab.value))
        for i, (f, o, lab) in enumerate(zip(freqs, offsets, labels))
    )
    return ChannelPlan(channels=channels, center_frequency=f_center)


def _gap_to_longer(band: Band, gaps) -> float:
    """Gap in nm between ``band`` and its neighbour towards longer wavelength."""
    i = BAND_ORDER.index(band)
    if i == len(BAND_ORDER) - 1:
        return 0.0
    return gaps.get((band, BAND_ORDER[i + 1]), 0.0)


def dispersion_coefficients(D: float, S: float, ref_wavelength: float) -> tuple[float, float]:
    """Return (beta2 [s^2/m], beta3 [s^3/m]) from D [s/m^2] and S [s/m^3]."""
    if ref_wavelength <= 0:
        raise ValueError("reference wavelength must be positive")
    k = ref_wavelength**2 / (2 * np.pi * C_LIGHT)
    beta2 = -D * k
    beta3 = k**2 * (S + 2 * D / ref_wavelength)
    return float(beta2), float(beta3)


@dataclass(frozen=True, eq=False)
class FiberSpec:
    """Fiber constants in SI units.

    ``attenuation`` and ``attenuation_bar`` are power attenuation coefficients
    in Np/m; either a scalar or a per-channel array aligned to the plan.
    """

    attenuation: float | np.ndarray = float(db_per_km_to_np_per_m(0.16))
    dispersion_D: float = ps_per_nm_km_to_si(18.0)
    dispersion_slope_S: float = ps_per_nm2_km_to_si(0.067)
    nonlinearity_gamma: float = per_w_km_to_si(1.2)
    raman_slope_Cr: float = raman_slope_to_si(0.028)
    span_length: float = 70e3
    ref_wavelength: float = 1540e-9
    attenuation_bar: float | np.ndarray | None = None

    def __post_init__(self):
        if np.any(np.asarray(self.attenuation) < 0):
            raise ValueError("fiber.attenuation must be non-negative")
        if self.attenuation_bar is not None and np.any(np.asarray(self.attenuation_bar) <= 0):
            raise ValueError("fiber.attenuation_bar must be positive")
        if self.nonlinearity_gamma < 0:
            raise ValueError("fiber.nonlinearity_gamma must be non-negative")
        if self.raman_slope_Cr < 0:
            raise ValueError("fiber.raman_slope_Cr must be non-negative")
        if self.span_length <= 0:
            raise ValueError("fiber.span_length must be positive")
        if self.ref_wavelength <= 0:
            raise ValueError("fiber.ref_wavelength must be positive")

    def alpha(self, n_channels: int) -> np.ndarray:
        return _per_channel(self.attenuation, n_channels, "attenuation")

    def alpha_bar(self, n_channels: int) -> np.ndarray:
        value = self.attenuation if self.attenuation_bar is None else self.attenuation_bar
        return _per_channel(value, n_channels, "attenuation_bar")

    @property
    def beta(self) -> tuple[float, float]:
        return dispersion_coefficients(self.dispersion_D, self.dispersion_slope_S, self.ref_wavelength)

    def with_(self, **changes) -> "FiberSpec":
        from dataclasses import replace

        return replace(self, **changes)


def _per_channel(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name} table has {arr.size} entries for {n} channels")
    return arr.copy()


@dataclass(frozen=True)
class Ideal:
    """Launch power fully restored after every span."""

    name = "ideal"


@dataclass(frozen=True)
class Partial:
    """A fraction of the ISRS tilt is undone per span, full reset every ``reset_period`` spans."""

    compensation_fraction: float = 0.5
    reset_period: int = 5
    name = "partial"

    def __post_init__(self):
        if not 0.0 <= self.compensation_fraction <= 1.0:
            raise ValueError("compensation_fraction must lie in [0, 1]")
        if self.reset_period < 1:
            raise ValueError("reset_period must be >= 1")


Equalization = Ideal | Partial


ASE_GAIN_MODES = ("net-of-raman", "applied")


@dataclass(frozen=True)
class AmplifierSpec:
    noise_figure_db: Mapping[Band, float] = field(
        default_factory=lambda: {Band.S: 7.0, Band.C: 4.0, Band.L: 6.0}
    )
    equalization: Equalization = Ideal()
    ase_polarizations: int = 2
    # "net-of-raman": the Raman transfer inside a span is noiseless, amplifiers
    # add ASE for the rest of the gain; "applied": ASE follows the full gain
    ase_gain: str = "net-of-raman"

    def __post_init__(self):
        if self.ase_polarizations not in (1, 2):
            raise ValueError("ase_polarizations must be 1 or 2")
        if self.ase_gain not in ASE_GAIN_MODES:
            raise ValueError(f"ase_gain must be one of {', '.join(ASE_GAIN_MODES)}")
        for band, nf in self.noise_figure_db.items():
            if nf <= 0:
                raise ValueError(f"noise figure of band {Band(band).value} must be > 0 dB")

    def noise_figures(self, plan: ChannelPlan) -> np.ndarray:
        table = {Band(k).value: v for k, v in self.noise_figure_db.items()}
        try:
            return np.array([table[b] for b in plan.bands], dtype=float)
        except KeyError as exc:
            raise ValueError(f"no noise figure for band {exc.args[0]}") from None


@dataclass(frozen=True)
class LinkSpec:
    n_spans: int = 100
    fiber: FiberSpec = field(default_factory=FiberSpec)
    amplifier: AmplifierSpec = field(default_factory=AmplifierSpec)

    def __post_init__(self):
        if self.n_spans < 1:
            raise ValueError("link.n_spans must be >= 1")


def as_power_vector(powers: Sequence[float] | np.ndarray, plan: ChannelPlan) -> np.ndarray:
    """Validate a per-channel launch power vector in W."""
    p = np.asarray(powers, dtype=float)
    if p.ndim == 0:
        p = np.full(len(plan), float(p))
    if p.shape != (len(plan),):
        raise ValueError(f"power vector has {p.size} entries for {len(plan)} channels")
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise ValueError("launch powers must be finite and positive")
    return p
