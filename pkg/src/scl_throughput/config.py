"""Sectioned INI run configuration, validated into typed blocks."""
from __future__ import annotations

import configparser
import csv
from importlib import resources
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .modem.constellation import Constellation, square_qam
from .modem.formats import ChannelFormats
from .modem.shaping import shape_constellation
from .optimizer import PowerBounds, PsoConfig
from .plan import AmplifierSpec, Band, ChannelPlan, FiberSpec, Ideal, LinkSpec, Partial, build_channel_plan
from .units import (
    db_per_km_to_np_per_m,
    per_w_km_to_si,
    ps_per_nm2_km_to_si,
    ps_per_nm_km_to_si,
    raman_slope_to_si,
)

BUILTIN_FORMATS = {"gs16": "gs16_7db.txt", "gs64": "gs64_11db.txt"}


class ConfigError(ValueError):
    pass


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PlanBlock(_Section):
    channels_s: int = Field(164, ge=0)
    channels_c: int = Field(100, ge=0)
    channels_l: int = Field(100, ge=0)
    symbol_rate: float = Field(50.0, gt=0, description="GBd")
    spacing: float | None = Field(None, gt=0, description="GHz; defaults to the symbol rate")
    center_wavelength: float = Field(1540.0, gt=0, description="nm")
    gap_sc: float = Field(10.0, ge=0, description="nm")
    gap_cl: float = Field(5.0, ge=0, description="nm")


class FiberBlock(_Section):
    attenuation: float = Field(0.16, ge=0, description="dB/km")
    dispersion: float = Field(18.0, description="ps/nm/km")
    dispersion_slope: float = Field(0.067, description="ps/nm^2/km")
    gamma: float = Field(1.2, ge=0, description="1/W/km")
    raman_slope: float = Field(0.028, ge=0, description="1/W/km/THz")
    span_length: float = Field(70.0, gt=0, description="km")
    reference_wavelength: float = Field(1540.0, gt=0, description="nm")


class AmplifierBlock(_Section):
    nf_s: float = Field(7.0, gt=0, description="dB")
    nf_c: float = Field(4.0, gt=0, description="dB")
    nf_l: float = Field(6.0, gt=0, description="dB")
    equalization: Literal["ideal", "partial"] = "ideal"
    compensation_fraction: float = Field(0.5, ge=0, le=1)
    reset_period: int = Field(5, ge=1)
    ase_polarizations: int = Field(2, ge=1, le=2)
    ase_gain: Literal["net-of-raman", "applied"] = "net-of-raman"


class LinkBlock(_Section):
    n_spans: int = Field(100, ge=1)


class ModulationBlock(_Section):
    s: str = "builtin:gs16"
    c: str = "builtin:gs64"
    l: str = "builtin:gs64"

    @field_validator("s", "c", "l")
    @classmethod
    def _known_kind(cls, v: str) -> str:
        kind = v.split(":", 1)[0]
        if kind not in ("builtin", "qam", "file", "shape"):
            raise ValueError("format must start with builtin:, qam:, file: or shape:")
        return v


class NliBlock(_Section):
    format_correction: float = Field(5.0 / 6.0, ge=0)
    epsilon: float | Literal["auto"] = "auto"
    raman_step: float = Field(50.0, gt=0, description="m")


class LaunchBlock(_Section):
    power: float = Field(-3.5, description="dBm per channel, flat")
    file: str | None = None


class OptimizerBlock(_Section):
    swarm_size: int = Field(50, ge=1)
    iterations: int = Field(200, ge=0)
    inertia: float = Field(0.7, ge=0, lt=1)
    cognitive: float = Field(1.5, gt=0)
    social: float = Field(1.5, gt=0)
    seed: int = Field(0, ge=0)
    offset_min: float = -6.0
    offset_max: float = 6.0
    tilt_min: float = -6.0
    tilt_max: float = 6.0
    refine: bool = True
    refine_step: float = Field(0.1, gt=0, description="dB")
    refine_tol: float = Field(1e-3, gt=0, description="Tb/s")
    refine_max_iters: int = Field(100, ge=0)


class RatesBlock(_Section):
    k: int = Field(6, ge=1)
    k_sweep: list[int] = [1, 2, 3, 4, 5, 6, 7, 8]
    penalty: float = Field(0.0, ge=0, lt=1)

    @field_validator("k_sweep")
    @classmethod
    def _positive(cls, v):
        if not v or min(v) < 1:
            raise ValueError("k_sweep must be a non-empty list of integers >= 1")
        return v


class OracleBlock(_Section):
    n_mc: int = Field(1_000_000, ge=1000)
    seed: int = Field(0, ge=0)
    channels: int = Field(5, ge=1, le=10)
    tolerance_db: float = Field(0.5, gt=0)


class OutputBlock(_Section):
    dir: str = "out"
    plots: bool = False


class SimulationConfig(_Section):
    plan: PlanBlock = PlanBlock()
    fiber: FiberBlock = FiberBlock()
    amplifier: AmplifierBlock = AmplifierBlock()
    link: LinkBlock = LinkBlock()
    modulation: ModulationBlock = ModulationBlock()
    nli: NliBlock = NliBlock()
    launch: LaunchBlock = LaunchBlock()
    optimizer: OptimizerBlock = OptimizerBlock()
    rates: RatesBlock = RatesBlock()
    oracle: OracleBlock = OracleBlock()
    output: OutputBlock = OutputBlock()

    # -- builders -------------------------------------------------------
    def build_plan(self) -> ChannelPlan:
        p = self.plan
        counts = {Band.S: p.channels_s, Band.C: p.channels_c, Band.L: p.channels_l}
        return build_channel_plan(
            {b: n for b, n in counts.items() if n > 0},
            symbol_rate=p.symbol_rate * 1e9,
            center_wavelength=p.center_wavelength * 1e-9,
            gaps_nm={(Band.S, Band.C): p.gap_sc, (Band.C, Band.L): p.gap_cl},
            spacing=None if p.spacing is None else p.spacing * 1e9,
        )

    def build_fiber(self) -> FiberSpec:
        f = self.fiber
        return FiberSpec(
            attenuation=float(db_per_km_to_np_per_m(f.attenuation)),
            dispersion_D=ps_per_nm_km_to_si(f.dispersion),
            dispersion_slope_S=ps_per_nm2_km_to_si(f.dispersion_slope),
            nonlinearity_gamma=per_w_km_to_si(f.gamma),
            raman_slope_Cr=raman_slope_to_si(f.raman_slope),
            span_length=f.span_length * 1e3,
            ref_wavelength=f.reference_wavelength * 1e-9,
        )

    def build_link(self) -> LinkSpec:
        a = self.amplifier
        eq = Ideal() if a.equalization == "ideal" else Partial(a.compensation_fraction, a.reset_period)
        amp = AmplifierSpec(
            noise_figure_db={Band.S: a.nf_s, Band.C: a.nf_c, Band.L: a.nf_l},
            equalization=eq,
            ase_polarizations=a.ase_polarizations,
            ase_gain=a.ase_gain,
        )
        return LinkSpec(n_spans=self.link.n_spans, fiber=self.build_fiber(), amplifier=amp)

    def build_formats(self, plan: ChannelPlan, base_dir: Path | None = None) -> ChannelFormats:
        by_band = {}
        for band in plan.present_bands():
            spec = getattr(self.modulation, Band(band).value.lower())
            by_band[Band(band).value] = resolve_format(spec, base_dir)
        return ChannelFormats(plan, by_band)

    def link_kwargs(self) -> dict:
        n = self.nli
        return {
            "raman_step": n.raman_step,
            "format_correction": n.format_correction,
            "epsilon": None if n.epsilon == "auto" else float(n.epsilon),
        }

    def pso_config(self) -> PsoConfig:
        o = self.optimizer
        return PsoConfig(o.swarm_size, o.iterations, o.inertia, o.cognitive, o.social, o.seed)

    def power_bounds(self) -> PowerBounds:
        o = self.optimizer
        return PowerBounds((o.offset_min, o.offset_max), (o.tilt_min, o.tilt_max))


def resolve_format(spec: str, base_dir: Path | None = None) -> Constellation:
    """``builtin:gs16``, ``qam:<bits>``, ``file:<path>`` or ``shape:<bits>:<snr_db>[:<seed>]``."""
    kind, _, arg = spec.partition(":")
    if kind == "builtin":
        if arg not in BUILTIN_FORMATS:
            raise ConfigError(f"unknown builtin format {arg!r}; choose from {sorted(BUILTIN_FORMATS)}")
        ref = resources.files("scl_throughput") / "data" / BUILTIN_FORMATS[arg]
        with resources.as_file(ref) as path:
            return Constellation.from_file(path, name=arg)
    if kind == "qam":
        return square_qam(int(arg))
    if kind == "file":
        path = Path(arg)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        return Constellation.from_file(path)
    if kind == "shape":
        parts = arg.split(":")
        seed = int(parts[2]) if len(parts) > 2 else 0
        return shape_constellation(int(parts[0]), float(parts[1]), seed=seed)
    raise ConfigError(f"unknown format {spec!r}")


def _coerce(value: str):
    """Comma-separated values become lists; everything else stays a string for pydantic."""
    return [v.strip() for v in value.split(",") if v.strip()] if "," in value else value


def parse_config_text(text: str, source: str = "<config>") -> SimulationConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    raw = {}
    for section in parser.sections():
        raw[section] = {key: _coerce(val) for key, val in parser.items(section)}
    try:
        return SimulationConfig.model_validate(raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        where = ".".join(str(p) for p in err["loc"])
        raise ConfigError(f"{source}: {where}: {err['msg']}") from None


def load_config(path: str | Path) -> SimulationConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    return parse_config_text(path.read_text(), source=str(path))


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ", ".join(_format_value(x) for x in v)
    return str(v)


def dump_config(cfg: SimulationConfig) -> str:
    """Fully resolved config text; parsing it back gives an equal config."""
    lines = []
    for section, values in cfg.model_dump().items():
        lines.append(f"[{section}]")
        for key, value in values.items():
            if value is None:
                continue
            lines.append(f"{key} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)


def with_overrides(cfg: SimulationConfig, out: str | None = None, seed: int | None = None) -> SimulationConfig:
    updates = {}
    if out is not None:
        updates["output"] = cfg.output.model_copy(update={"dir": out})
    if seed is not None:
        updates["optimizer"] = cfg.optimizer.model_copy(update={"seed": seed})
        updates["oracle"] = cfg.oracle.model_copy(update={"seed": seed})
    return cfg.model_copy(update=updates)


def launch_powers_dbm(cfg: SimulationConfig, plan: ChannelPlan, base_dir: Path | None = None) -> np.ndarray:
    """Flat launch from ``launch.power`` or per-channel values from ``launch.file``."""
    if cfg.launch.file is None:
        return np.full(len(plan), cfg.launch.power)
    path = Path(cfg.launch.file)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    return read_powers_csv(path, len(plan))


def read_powers_csv(path: Path, n: int) -> np.ndarray:
    """Per-channel launch powers from a CSV with at least ``index`` and ``launch_dbm`` columns."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read launch powers: {exc}") from None
    if not rows or not {"index", "launch_dbm"} <= set(rows[0]):
        raise ConfigError(f"{path}: expected columns index,launch_dbm")
    index = [int(r["index"]) for r in rows]
    if index != list(range(n)):
        raise ConfigError(f"{path}: expected {n} rows indexed 0..{n - 1}")
    return np.array([float(r["launch_dbm"]) for r in rows])
