"""Signal power evolution under inter-channel stimulated Raman scattering.

The triangular Raman gain approximation couples channel ``i`` to every other
channel ``j`` with a gain proportional to their frequency separation::

    dP_i/dz = -alpha_i P_i - Cr P_i sum_j (f_i - f_j) P_j

Higher-frequency channels lose power to lower-frequency ones. The coupling
terms are pairwise antisymmetric, so without loss the total power is
conserved.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .plan import ChannelPlan, FiberSpec, as_power_vector
from .units import DB_PER_NEPER

DEFAULT_STEP = 50.0  # m
MIN_VALID_OFFSET = 100e9  # Hz; closer channels get an interpolated Cr


class RamanError(RuntimeError):
    pass


class RamanIntegrationError(RamanError):
    """Non-finite or non-positive power during ODE integration."""


class RamanFitError(RamanError):
    """Effective Raman slope could not be bracketed."""


@dataclass(frozen=True, eq=False)
class PowerProfile:
    """Per-channel power sampled along one span; ``powers`` is ``[n_z, n_channels]`` in W."""

    z: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        if self.z.ndim != 1 or self.powers.shape[0] != self.z.size:
            raise ValueError("profile powers must be shaped [n_z, n_channels]")

    @property
    def launch(self) -> np.ndarray:
        return self.powers[0]

    @property
    def end(self) -> np.ndarray:
        return self.powers[-1]

    def to_csv(self, path: str | Path) -> None:
        n = self.powers.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["z_m"] + [f"ch{i}" for i in range(n)])
            for z, row in zip(self.z, self.powers):
                writer.writerow([repr(float(z))] + [repr(float(p)) for p in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> "PowerProfile":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(z=data[:, 0].copy(), powers=data[:, 1:].copy())


@dataclass(frozen=True, eq=False)
class EffectiveRamanFit:
    global_cr_hat: float
    per_channel_cr_hat: np.ndarray
    fit_residual_db: float


@numba.njit(cache=True)
def _rk4_kernel(p0, alpha, freqs, cr, h, steps_per_sample, n_samples, out):
    n = p0.size
    p = p0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    out[0, :] = p
    for s in range(1, n_samples):
        for _ in range(steps_per_sample):
            _rhs(p, alpha, freqs, cr, k1)
            for i in range(n):
                tmp[i] = p[i] + 0.5 * h * k1[i]
            _rhs(tmp, alpha, freqs, cr, k2)
            for i in range(n):
                tmp[i] = p[i] + 0.5 * h * k2[i]
            _rhs(tmp, alpha, freqs, cr, k3)
            for i in range(n):
                tmp[i] = p[i] + h * k3[i]
            _rhs(tmp, alpha, freqs, cr, k4)
            for i in range(n):
                p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        out[s, :] = p
        for i in range(n):
            if not (p[i] > 0.0 and math.isfinite(p[i])):
                return s
    return -1


@numba.njit(cache=True)
def _rhs(p, alpha, freqs, cr, dp):
    # sum_j (f_i - f_j) P_j = f_i * S - F
    total = 0.0
    weighted = 0.0
    for j in range(p.size):
        total += p[j]
        weighted += freqs[j] * p[j]
    for i in range(p.size):
        dp[i] = -alpha[i] * p[i] - cr * p[i] * (freqs[i] * total - weighted)


def solve_raman_ode(
    plan: ChannelPlan,
    launch,
    fiber: FiberSpec,
    n_z: int = 141,
    step: float = DEFAULT_STEP,
) -> PowerProfile:
    """Integrate the triangular-gain Raman equations over one span with fixed-step RK4.

    The span is sampled at ``n_z`` uniformly spaced points; between samples
    the integrator takes the smallest number of equal steps not exceeding
    ``step`` metres.
    """
    if n_z < 2:
        raise ValueError("n_z must be >= 2")
    if step <= 0:
        raise ValueError("step must be positive")
    p0 = as_power_vector(launch, plan)
    length = fiber.span_length
    dz = length / (n_z - 1)
    per_sample = max(1, math.ceil(dz / step * (1 - 1e-12)))
    h = dz / per_sample
    # frequencies relative to the lowest channel keep f_i*S - F well conditioned
    freqs = plan.frequencies - plan.frequencies[0]
    out = np.empty((n_z, len(plan)))
    bad = _rk4_kernel(
        p0, fiber.alpha(len(plan)), freqs, float(fiber.raman_slope_Cr), h, per_sample, n_z, out
    )
    z = np.linspace(0.0, length, n_z)
    if bad >= 0:
        row = out[bad]
        ch = int(np.flatnonzero(~(np.isfinite(row) & (row > 0)))[0])
        raise RamanIntegrationError(
            f"power of channel {ch} became {row[ch]!r} at z = {z[bad]:.1f} m"
        )
    return PowerProfile(z=z, powers=out)


def end_of_span(plan: ChannelPlan, launch, fiber: FiberSpec, step: float = DEFAULT_STEP) -> np.ndarray:
    """Fiber-output powers only; cheaper bookkeeping than a full profile."""
    n_steps = max(1, math.ceil(fiber.span_length / step * (1 - 1e-12)))
    return solve_raman_ode(plan, launch, fiber, n_z=2, step=fiber.span_length / n_steps).end


def effective_length(alpha, z):
    """(1 - exp(-alpha z)) / alpha with the alpha -> 0 limit z."""
    alpha = np.asarray(alpha, dtype=float)
    safe = np.where(alpha > 0, alpha, 1.0)
    return np.where(alpha > 0, -np.expm1(-safe * z) / safe, z)


def first_order_profile(
    plan: ChannelPlan,
    launch,
    fiber: FiberSpec,
    cr,
    z: float,
    reference_cr: float | None = None,
) -> np.ndarray:
    """Closed-form power at distance ``z`` under an exponential Raman tilt.

    ``cr`` may be a scalar or a per-channel array. The normalising sum uses
    ``reference_cr`` when given (this reproduces the per-channel fit exactly),
    otherwise the same ``cr`` values as the numerator.
    """
    if not 0.0 <= z <= fiber.span_length * (1 + 1e-12):
        raise ValueError("z outside the span")
    p0 = as_power_vector(launch, plan)
    alpha = fiber.alpha(len(plan))
    p_tot = p0.sum()
    leff = effective_length(alpha.mean(), z)
    df = plan.offsets
    cr = np.broadcast_to(np.asarray(cr, dtype=float), p0.shape)
    # shift exponents by their maximum to avoid overflow at large tilts
    expo = -p_tot * cr * leff * df
    if reference_cr is None:
        norm_expo = expo
    else:
        norm_expo = -p_tot * reference_cr * leff * df
    shift = norm_expo.max()
    denom = np.sum(p0 * np.exp(norm_expo - shift))
    return p0 * np.exp(-alpha * z) * p_tot * np.exp(expo - shift) / denom


def net_gain_db(profile: PowerProfile) -> np.ndarray:
    return 10.0 * np.log10(profile.end / profile.launch)


def _golden_section(fun, lo: float, hi: float, tol: float, max_iter: int = 200):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


def fit_effective_cr(
    numeric: PowerProfile | np.ndarray,
    plan: ChannelPlan,
    launch,
    fiber: FiberSpec,
    search_factor: float = 4.0,
) -> EffectiveRamanFit:
    """Match the exponential-tilt model to numerically propagated end-of-span powers.

    A single slope is fitted first by golden-section search on
    ``[0, search_factor * Cr]`` minimising the summed squared dB mismatch.
    Each channel then gets the slope that reproduces its own end-of-span power
    exactly with the global normalisation held fixed. Channels within 100 GHz
    of the grid center, where that equation is ill-conditioned, are
    interpolated from their neighbours.

    ``numeric`` is either a :class:`PowerProfile` or the end-of-span powers.
    """
    p0 = as_power_vector(launch, plan)
    p_end = numeric.end if isinstance(numeric, PowerProfile) else np.asarray(numeric, dtype=float)
    if p_end.shape != p0.shape:
        raise ValueError("numeric profile does not match the plan")
    length = fiber.span_length
    target_db = 10.0 * np.log10(p_end)
    alpha = fiber.alpha(len(plan))
    p_tot = p0.sum()
    leff = float(effective_length(alpha.mean(), length))
    df = plan.offsets
    # natural-log form of first_order_profile at z = L, hoisted out of the search
    log_base = np.log(p0) - alpha * length + np.log(p_tot) - np.log(p_end)
    tilt = -p_tot * leff * df

    def residual(cr):
        expo = tilt * cr
        top = expo.max()
        log_denom = np.log(np.sum(p0 * np.exp(expo - top))) + top
        return float(np.sum((log_base + expo - log_denom) ** 2)) * DB_PER_NEPER**2

    upper = search_factor * fiber.raman_slope_Cr
    if not np.any(tilt):
        # no frequency spread (a single channel): the slope has no effect, keep the nominal one
        cr_hat = fiber.raman_slope_Cr
        res = residual(cr_hat)
    elif upper > 0:
        cr_hat, res = _golden_section(residual, 0.0, upper, tol=upper * 1e-10)
        if cr_hat > upper * (1 - 1e-6):
            raise RamanFitError(
                f"best slope sits on the upper search bound {upper:.3e} "
                f"(residual {res:.3e} dB^2); widen the search"
            )
    else:
        cr_hat, res = 0.0, residual(0.0)

    norm_expo = -p_tot * cr_hat * leff * df
    shift = norm_expo.max()
    denom = np.sum(p0 * np.exp(norm_expo - shift))

    # p_end = p0 e^{-alpha L} P_tot e^{-P_tot cr_i L_eff df_i - shift} / denom
    lhs = np.log(p_end * denom / (p0 * np.exp(-alpha * length) * p_tot)) + shift
    valid = np.abs(df) >= MIN_VALID_OFFSET
    per_channel = np.empty_like(df)
    if p_tot * leff > 0 and valid.any():
        per_channel[valid] = -lhs[valid] / (p_tot * leff * df[valid])
        if (~valid).any():
            per_channel[~valid] = np.interp(df[~valid], df[valid], per_channel[valid])
    else:
        per_channel[:] = cr_hat
    if not np.all(np.isfinite(per_channel)):
        raise RamanFitError("non-finite per-channel Raman slope")

    model = first_order_profile(plan, p0, fiber, cr_hat, length)
    worst = float(np.max(np.abs(10.0 * np.log10(model) - target_db)))
    return EffectiveRamanFit(
        global_cr_hat=float(cr_hat),
        per_channel_cr_hat=per_channel,
        fit_residual_db=worst,
    )


def attenuation_db(fiber: FiberSpec, n_channels: int) -> np.ndarray:
    """Span loss in dB per channel."""
    return fiber.alpha(n_channels) * fiber.span_length * DB_PER_NEPER
