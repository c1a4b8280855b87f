"""Launch-power optimization: particle swarm over per-band offset and tilt,
then per-channel finite-difference ascent.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .link import LinkError, LinkModel
from .modem.formats import ChannelFormats
from .plan import Band, ChannelPlan, LinkSpec, PlanError
from .raman import RamanError
from .units import dbm_to_watt

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PowerParam:
    """Offset (dBm) and tilt (dB, low to high frequency edge) for each present band.

    A channel at normalised in-band position ``x`` in [0, 1] gets
    ``offset + tilt * (x - 0.5)`` dBm.
    """

    bands: tuple[str, ...]
    offsets_dbm: np.ndarray
    tilts_db: np.ndarray

    @classmethod
    def from_vector(cls, bands, x) -> "PowerParam":
        x = np.asarray(x, dtype=float)
        return cls(tuple(bands), x[0::2].copy(), x[1::2].copy())

    def to_vector(self) -> np.ndarray:
        x = np.empty(2 * len(self.bands))
        x[0::2], x[1::2] = self.offsets_dbm, self.tilts_db
        return x

    def expand(self, plan: ChannelPlan) -> np.ndarray:
        """Per-channel launch power in dBm."""
        out = np.full(len(plan), np.nan)
        for band, off, tilt in zip(self.bands, self.offsets_dbm, self.tilts_db):
            mask = plan.band_mask(Band(band))
            f = plan.frequencies[mask]
            span = f.max() - f.min()
            x = (f - f.min()) / span if span > 0 else np.full(f.size, 0.5)
            out[mask] = off + tilt * (x - 0.5)
        if np.isnan(out).any():
            raise PlanError("power parameters do not cover every band of the plan")
        return out


@dataclass(frozen=True)
class PowerBounds:
    offset_dbm: tuple[float, float] = (-6.0, 6.0)
    tilt_db: tuple[float, float] = (-6.0, 6.0)

    def __post_init__(self):
        for name, (lo, hi) in (("offset_dbm", self.offset_dbm), ("tilt_db", self.tilt_db)):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"bounds {name} must be finite with lower < upper")

    def box(self, n_bands: int) -> tuple[np.ndarray, np.ndarray]:
        lo = np.tile([self.offset_dbm[0], self.tilt_db[0]], n_bands)
        hi = np.tile([self.offset_dbm[1], self.tilt_db[1]], n_bands)
        return lo, hi

    def channel_range(self) -> tuple[float, float]:
        """Per-channel dBm range reachable by the band parameterisation."""
        half = max(abs(self.tilt_db[0]), abs(self.tilt_db[1])) / 2
        return self.offset_dbm[0] - half, self.offset_dbm[1] + half


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 50
    iterations: int = 200
    inertia: float = 0.7
    cognitive: float = 1.5
    social: float = 1.5
    seed: int = 0
    velocity_fraction: float = 0.2

    def __post_init__(self):
        if self.swarm_size < 1 or self.iterations < 0:
            raise ValueError("swarm_size must be >= 1 and iterations >= 0")
        if not 0 <= self.inertia < 1:
            raise ValueError("inertia must lie in [0, 1)")
        if self.cognitive <= 0 or self.social <= 0 or self.velocity_fraction <= 0:
            raise ValueError("PSO coefficients must be positive")


@dataclass
class PsoResult:
    best_x: np.ndarray
    best_value: float
    trace: list[tuple[int, float, np.ndarray]] = field(default_factory=list)
    evaluations: int = 0


def pso(fun: Callable[[np.ndarray], float], lower, upper, config: PsoConfig = PsoConfig()) -> PsoResult:
    """Global-best particle swarm maximising ``fun`` inside a box.

    Velocities are clamped to ``velocity_fraction`` of the box width and
    particles leaving the box are reflected back with reversed velocity.
    Particles are evaluated in index order, so results depend only on the seed.
    """
    lo, hi = np.asarray(lower, float), np.asarray(upper, float)
    if lo.shape != hi.shape or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("bounds must be finite and of equal length")
    if np.any(hi <= lo):
        raise ValueError("every upper bound must exceed its lower bound")
    rng = np.random.default_rng(config.seed)
    n, d = config.swarm_size, lo.size
    vmax = config.velocity_fraction * (hi - lo)
    x = lo + rng.random((n, d)) * (hi - lo)
    v = rng.uniform(-1.0, 1.0, (n, d)) * vmax

    def evaluate(pos):
        return np.array([fun(p) for p in pos])

    values = evaluate(x)
    p_best, p_val = x.copy(), values.copy()
    g = int(np.argmax(p_val))
    result = PsoResult(best_x=p_best[g].copy(), best_value=float(p_val[g]), evaluations=n)
    result.trace.append((0, result.best_value, result.best_x.copy()))
    for it in range(1, config.iterations + 1):
        r1, r2 = rng.random((n, d)), rng.random((n, d))
        v = (
            config.inertia * v
            + config.cognitive * r1 * (p_best - x)
            + config.social * r2 * (result.best_x - x)
        )
        v = np.clip(v, -vmax, vmax)
        x = x + v
        over, under = x > hi, x < lo
        x = np.where(over, 2 * hi - x, np.where(under, 2 * lo - x, x))
        v = np.where(over | under, -v, v)
        x = np.clip(x, lo, hi)
        values = evaluate(x)
        result.evaluations += n
        better = values > p_val
        p_best[better], p_val[better] = x[better], values[better]
        g = int(np.argmax(p_val))
        if p_val[g] > result.best_value:
            result.best_value, result.best_x = float(p_val[g]), p_best[g].copy()
        result.trace.append((it, result.best_value, result.best_x.copy()))
    return result


@dataclass
class RefineResult:
    powers_dbm: np.ndarray
    value: float
    start_value: float
    iterations: int
    evaluations: int


def refine_gradient(
    fun: Callable[[np.ndarray], float],
    start,
    step_db: float = 0.1,
    tol: float = 1e9,
    max_iters: int = 100,
    bounds: tuple[float, float] = (-9.0, 9.0),
    initial_move_db: float = 0.5,
    min_move_db: float = 1e-3,
) -> RefineResult:
    """Projected ascent with central finite differences in the dB domain.

    Each iteration moves along the gradient scaled so its largest component
    is ``move`` dB. An improving move is kept and the next move doubles;
    otherwise the move halves. Stops when an accepted move gains less than
    ``tol`` (objective units, bit/s by default), when the move drops below
    ``min_move_db``, or after ``max_iters`` gradient evaluations. The result
    never scores below the start.
    """
    x = np.clip(np.asarray(start, dtype=float), *bounds)
    fx = fun(x)
    start_value = fx
    evals, move, it = 1, initial_move_db, 0
    while it < max_iters and move >= min_move_db:
        it += 1
        grad = np.empty_like(x)
        for i in range(x.size):
            probe = x.copy()
            probe[i] = x[i] + step_db
            up = fun(probe)
            probe[i] = x[i] - step_db
            down = fun(probe)
            grad[i] = (up - down) / (2 * step_db)
        evals += 2 * x.size
        scale = np.max(np.abs(grad[np.isfinite(grad)])) if np.isfinite(grad).any() else 0.0
        if not scale > 0:
            break
        grad = np.where(np.isfinite(grad), grad, 0.0)
        while move >= min_move_db:
            cand = np.clip(x + move * grad / scale, *bounds)
            fc = fun(cand)
            evals += 1
            if fc > fx:
                gain = fc - fx
                x, fx = cand, fc
                move *= 2.0
                break
            move /= 2.0
        else:
            break
        log.debug("refine iter %d objective %.6e move %.4f dB", it, fx, move)
        if gain < tol:
            break
    return RefineResult(powers_dbm=x, value=float(fx), start_value=float(start_value), iterations=it, evaluations=evals)


class ThroughputObjective:
    """Continuous GMI-bound throughput ``sum 2 Rs GMI_i`` (bit/s) of a launch vector in dBm."""

    def __init__(self, plan: ChannelPlan, link: LinkSpec, formats: ChannelFormats, **link_kwargs):
        self._setup(LinkModel(plan, link, kurtosis=formats.kurtosis, **link_kwargs), formats)

    @classmethod
    def from_model(cls, model: LinkModel, formats: ChannelFormats) -> "ThroughputObjective":
        obj = cls.__new__(cls)
        obj._setup(model, formats)
        return obj

    def _setup(self, model: LinkModel, formats: ChannelFormats) -> None:
        self.plan = model.plan
        self.formats = formats
        self.model = model
        self.weights = 2.0 * model.plan.bandwidths
        self.evaluations = 0

    def __call__(self, powers_dbm) -> float:
        self.evaluations += 1
        try:
            snr = self.model.propagate(dbm_to_watt(np.asarray(powers_dbm, dtype=float))).snr
        except (LinkError, RamanError, ValueError) as exc:
            log.warning("objective evaluation failed: %s", exc)
            return -np.inf
        return float(np.sum(self.weights * self.formats.gmi_interp(snr.snr_db)))

    def of_param(self, param: PowerParam) -> float:
        return self(param.expand(self.plan))


def objective(plan: ChannelPlan, link: LinkSpec, formats: ChannelFormats, powers_dbm) -> float:
    """One-off throughput objective; build a :class:`ThroughputObjective` for repeated use."""
    return ThroughputObjective(plan, link, formats)(powers_dbm)


@dataclass
class OptimizationResult:
    param: PowerParam
    pso: PsoResult
    refine: RefineResult | None


def optimize_launch(
    obj: ThroughputObjective,
    bounds: PowerBounds = PowerBounds(),
    pso_config: PsoConfig = PsoConfig(),
    refine: bool = True,
    refine_kwargs: dict | None = None,
) -> tuple[np.ndarray, float, OptimizationResult]:
    """PSO over the band parameters followed by per-channel refinement."""
    bands = tuple(b.value for b in obj.plan.present_bands())
    lo, hi = bounds.box(len(bands))
    swarm = pso(lambda x: obj.of_param(PowerParam.from_vector(bands, x)), lo, hi, pso_config)
    param = PowerParam.from_vector(bands, swarm.best_x)
    start = param.expand(obj.plan)
    refined = None
    if refine:
        kwargs = {"bounds": bounds.channel_range(), **(refine_kwargs or {})}
        refined = refine_gradient(obj, start, **kwargs)
        powers, value = refined.powers_dbm, refined.value
    else:
        powers, value = start, swarm.best_value
    return powers, value, OptimizationResult(param=param, pso=swarm, refine=refined)


def write_trace(path: str | Path, result: PsoResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        d = result.best_x.size
        writer.writerow(["iter", "best_objective_tbps"] + [f"param{i}" for i in range(d)])
        for it, value, x in result.trace:
            writer.writerow([it, repr(value / 1e12)] + [repr(float(v)) for v in x])
