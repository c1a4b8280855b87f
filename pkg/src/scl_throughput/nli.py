"""Nonlinear interference: closed-form ISRS GN evaluation, span accumulation
and a Monte-Carlo reference integral used to validate the closed form.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .plan import ChannelPlan, FiberSpec, as_power_vector
from .raman import EffectiveRamanFit, PowerProfile

DEFAULT_FORMAT_CORRECTION = 5.0 / 6.0
MC_CHUNK = 20_000


class NliError(ValueError):
    pass


class NliSingularityError(NliError):
    """Zero dispersion phase for a channel or channel pair."""


class AccumulationModeError(NliError):
    pass


class Accumulation(str, enum.Enum):
    HOMOGENEOUS = "homogeneous"
    PER_SPAN = "per-span"


@dataclass(frozen=True, eq=False)
class NliReport:
    """Per-channel NLI coefficients (1/W^2) and NLI power (W).

    For a single span ``launch`` holds that span's input powers; for an
    accumulated report it is the first-span launch the totals refer to.
    """

    eta_spm: np.ndarray
    eta_xpm: np.ndarray
    eta_corr: np.ndarray
    p_nli: np.ndarray
    launch: np.ndarray
    span_length: float
    epsilon: float = 0.0

    @property
    def eta_total(self) -> np.ndarray:
        return self.eta_spm + self.eta_xpm + self.eta_corr


class NliGeometry:
    """Power-independent parts of the closed form for one plan and fiber.

    Every asinh/atan term depends only on frequencies, bandwidths and
    attenuation, so it is computed once; evaluating the closed form for a
    new launch vector then reduces to two matrix-vector products.
    """

    def __init__(
        self,
        plan: ChannelPlan,
        fiber: FiberSpec,
        beta: tuple[float, float] | None = None,
        format_correction: float = DEFAULT_FORMAT_CORRECTION,
    ):
        n = len(plan)
        self.plan = plan
        self.fiber = fiber
        self.format_correction = float(format_correction)
        beta2, beta3 = fiber.beta if beta is None else beta
        a = fiber.alpha(n)
        ab = fiber.alpha_bar(n)
        if np.any(a <= 0):
            raise NliError("the closed form needs a strictly positive attenuation")
        big_a = a + ab
        bw = plan.bandwidths
        df = plan.offsets
        gamma = fiber.nonlinearity_gamma
        self.alpha, self.alpha_bar, self.big_a, self.df = a, ab, big_a, df

        phi = 1.5 * np.pi**2 * (beta2 + 2 * np.pi * beta3 * df)
        if np.any(phi == 0):
            i = int(np.flatnonzero(phi == 0)[0])
            raise NliSingularityError(f"zero SPM dispersion phase for channel {i}")
        pref = (4 / 9) * gamma**2 / bw**2 * np.pi / (phi * ab * (2 * a + ab))
        self.spm1 = pref * np.arcsinh(phi * bw**2 / (a * np.pi)) / a
        self.spm2 = pref * np.arcsinh(phi * bw**2 / (big_a * np.pi)) / big_a

        # rows: channel of interest i, columns: interferer k
        fi, fk = df[:, None], df[None, :]
        phi_ik = np.abs(2 * np.pi**2 * (fk - fi) * (beta2 + np.pi * beta3 * (fi + fk)))
        off = ~np.eye(n, dtype=bool)
        if np.any(phi_ik[off] == 0):
            i, k = np.argwhere((phi_ik == 0) & off)[0]
            raise NliSingularityError(f"zero XPM dispersion phase for channel pair ({i}, {k})")
        safe_phi = np.where(off, phi_ik, 1.0)
        bi = bw[:, None]
        ak, abk, bigk, bk = a[None, :], ab[None, :], big_a[None, :], bw[None, :]
        xpref = (32 / 27) * gamma**2 / (bk * safe_phi * abk * (2 * ak + abk))
        self.xpm1 = np.where(off, xpref * np.arctan(safe_phi * bi / ak) / ak, 0.0)
        self.xpm2 = np.where(off, xpref * np.arctan(safe_phi * bi / bigk) / bigk, 0.0)

    def tilt_terms(self, launch: np.ndarray, cr_hat: np.ndarray) -> np.ndarray:
        return (self.big_a - self.df * launch.sum() * cr_hat) ** 2

    def evaluate(self, launch, cr_hat, kurtosis=None) -> NliReport:
        p = as_power_vector(launch, self.plan)
        cr_hat = np.broadcast_to(np.asarray(cr_hat, dtype=float), p.shape)
        t = self.tilt_terms(p, cr_hat)
        a, big_a = self.alpha, self.big_a
        w1 = t - a**2
        w2 = big_a**2 - t
        eta_spm = self.spm1 * w1 + self.spm2 * w2
        p2 = p**2
        eta_xpm = (self.xpm1 @ (p2 * w1) + self.xpm2 @ (p2 * w2)) / p2
        if kurtosis is None:
            eta_corr = np.zeros_like(p)
        else:
            phi_k = np.broadcast_to(np.asarray(kurtosis, dtype=float), p.shape)
            eta_corr = self.format_correction * (
                self.xpm1 @ (phi_k * p2 * w1) + self.xpm2 @ (phi_k * p2 * w2)
            ) / p2
        eta = eta_spm + eta_xpm + eta_corr
        return NliReport(
            eta_spm=eta_spm,
            eta_xpm=eta_xpm,
            eta_corr=eta_corr,
            p_nli=eta * p**3,
            launch=p,
            span_length=self.fiber.span_length,
        )


def eta_closed_form(
    plan: ChannelPlan,
    launch,
    fiber: FiberSpec,
    fit: EffectiveRamanFit | None,
    formats=None,
    format_correction: float = DEFAULT_FORMAT_CORRECTION,
    beta: tuple[float, float] | None = None,
) -> NliReport:
    """Single-span NLI coefficients of every channel.

    ``formats`` holds the per-channel excess kurtosis (``None`` or zeros for
    Gaussian signalling). ``fit=None`` means no Raman tilt. ``beta`` overrides
    the (beta2, beta3) pair derived from the fiber.
    """
    geometry = NliGeometry(plan, fiber, beta=beta, format_correction=format_correction)
    cr_hat = 0.0 if fit is None else fit.per_channel_cr_hat
    return geometry.evaluate(launch, cr_hat, formats)


def epsilon_coherence(fiber: FiberSpec, total_bandwidth: float, n_channels: int = 1) -> float:
    """Coherence exponent of the self-channel NLI accumulated over identical spans."""
    if total_bandwidth <= 0:
        raise ValueError("total bandwidth must be positive")
    ab = float(np.mean(fiber.alpha_bar(n_channels)))
    beta2 = abs(fiber.beta[0])
    length = fiber.span_length
    return float(
        0.3 * np.log1p((6.0 / (ab * length)) / np.arcsinh(0.5 * np.pi**2 * beta2 / ab * total_bandwidth**2))
    )


def accumulate_nli(
    per_span: Sequence[NliReport],
    mode: Accumulation | str = Accumulation.HOMOGENEOUS,
    epsilon: float = 0.0,
) -> NliReport:
    """Combine single-span reports into end-of-link totals.

    Homogeneous: all spans identical; self-channel terms add with exponent
    ``1 + epsilon``, the rest linearly. Per-span: incoherent sum in which each
    span's coefficients are rescaled by ``(P_span / P_launch)^2`` so that the
    total, multiplied by the cube of the first-span launch, is the NLI power
    referred to the transmitter. The self-channel sum is still scaled by
    ``n^epsilon``, which makes both modes agree when all spans are equal.
    """
    if not per_span:
        raise ValueError("no span reports to accumulate")
    mode = Accumulation(mode)
    first = per_span[0]
    n = len(per_span)
    if mode is Accumulation.HOMOGENEOUS:
        if any(r.span_length != first.span_length for r in per_span):
            raise AccumulationModeError("homogeneous accumulation needs identical span lengths")
        spm = first.eta_spm * n ** (1.0 + epsilon)
        xpm = first.eta_xpm * n
        corr = first.eta_corr * n
        eps = epsilon
    else:
        spm = np.zeros_like(first.eta_spm)
        xpm = np.zeros_like(spm)
        corr = np.zeros_like(spm)
        for r in per_span:
            scale = (r.launch / first.launch) ** 2
            spm = spm + r.eta_spm * scale
            xpm = xpm + r.eta_xpm * scale
            corr = corr + r.eta_corr * scale
        spm = spm * n**epsilon
        eps = epsilon
    total = spm + xpm + corr
    return NliReport(
        eta_spm=spm,
        eta_xpm=xpm,
        eta_corr=corr,
        p_nli=np.maximum(total, 0.0) * first.launch**3,
        launch=first.launch,
        span_length=first.span_length,
        epsilon=eps,
    )


@numba.njit(cache=True)
def _span_factor(log_rho, z, k1, k2, k3, ci, phase, out):
    """|integral over z of sqrt(rho1 rho2 rho3 / rho_i) exp(i phase z)|^2 per sample.

    ``ln`` of the integrand envelope is linear on every grid interval, so each
    interval integrates in closed form.
    """
    n_z = z.size
    for s in range(phase.size):
        a, b, c = k1[s], k2[s], k3[s]
        w = phase[s]
        acc = 0j
        lg0 = 0.5 * (log_rho[0, a] + log_rho[0, b] + log_rho[0, c] - log_rho[0, ci])
        # integrand at the left end of the interval, advanced by one factor per step
        left = np.exp(complex(lg0, w * z[0]))
        for j in range(n_z - 1):
            lg1 = 0.5 * (log_rho[j + 1, a] + log_rho[j + 1, b] + log_rho[j + 1, c] - log_rho[j + 1, ci])
            h = z[j + 1] - z[j]
            rate = complex((lg1 - lg0) / h, w)
            hr = rate * h
            step = np.exp(hr)
            if abs(hr) < 1e-8:
                acc += left * h * (1.0 + 0.5 * hr)
            else:
                acc += left * (step - 1.0) / rate
            left *= step
            lg0 = lg1
        out[s] = acc.real * acc.real + acc.imag * acc.imag


@dataclass(frozen=True)
class OracleEstimate:
    eta: float
    stderr: float
    n_mc: int


def eta_oracle(
    plan: ChannelPlan,
    launch,
    fiber: FiberSpec,
    profile: PowerProfile,
    channel_index: int,
    n_mc: int = 1_000_000,
    seed: int = 0,
    beta: tuple[float, float] | None = None,
) -> OracleEstimate:
    """Monte-Carlo evaluation of the ISRS GN double integral for one channel.

    The integration variables ``(f1, f2)`` are drawn uniformly over the
    occupied slots. The span integral uses the sampled power profile: the
    normalised log-power ``ln rho(z)`` of each channel is taken piecewise
    linear in ``z`` and the oscillating factor is integrated exactly on every
    interval, which keeps the quadrature accurate on a coarse ``z`` grid.
    Chunks draw from independent child seeds, so the result does not depend
    on how the work is split.
    """
    if n_mc < 1000:
        raise ValueError("n_mc must be at least 1000 for a meaningful estimate")
    p = as_power_vector(launch, plan)
    n = len(plan)
    if not 0 <= channel_index < n:
        raise ValueError(f"channel {channel_index} outside the plan")
    if profile.powers.shape[1] != n:
        raise ValueError("profile does not cover the plan's channels")
    if abs(profile.z[-1] - fiber.span_length) > 1e-6 * fiber.span_length:
        raise ValueError("profile does not cover the span")
    beta2, beta3 = fiber.beta if beta is None else beta
    gamma = fiber.nonlinearity_gamma

    df, bw = plan.offsets, plan.bandwidths
    lo, hi = df - bw / 2, df + bw / 2
    psd = p / bw
    weights = bw / bw.sum()
    volume = bw.sum() ** 2
    log_rho = np.log(profile.powers / profile.powers[0])  # [n_z, n]
    z = profile.z
    f = df[channel_index]

    def locate(freq):
        k = np.searchsorted(lo, freq, side="right") - 1
        inside = (k >= 0) & (freq <= hi[np.clip(k, 0, n - 1)])
        return np.clip(k, 0, n - 1), inside

    n_chunks = -(-n_mc // MC_CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    values = np.empty(n_mc)
    for c, child in enumerate(children):
        size = min(MC_CHUNK, n_mc - c * MC_CHUNK)
        rng = np.random.default_rng(child)
        k1 = rng.choice(n, size=size, p=weights)
        k2 = rng.choice(n, size=size, p=weights)
        f1 = lo[k1] + rng.random(size) * bw[k1]
        f2 = lo[k2] + rng.random(size) * bw[k2]
        f3 = f1 + f2 - f
        k3, inside = locate(f3)
        g = psd[k1] * psd[k2] * psd[k3] * inside
        phase = -4 * np.pi**2 * (f1 - f) * (f2 - f) * (beta2 + np.pi * beta3 * (f1 + f2))
        idx = np.flatnonzero(inside)
        hits = np.empty(idx.size)
        _span_factor(log_rho, z, k1[idx], k2[idx], k3[idx], channel_index, phase[idx], hits)
        span = np.zeros(size)
        span[idx] = hits
        start = c * MC_CHUNK
        values[start : start + size] = g * span
    scale = (16 / 27) * gamma**2 * volume * bw[channel_index] / p[channel_index] ** 3
    mean = values.mean()
    stderr = values.std(ddof=1) / np.sqrt(n_mc)
    return OracleEstimate(eta=float(scale * mean), stderr=float(scale * stderr), n_mc=n_mc)
