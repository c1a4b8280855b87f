"""Span-by-span link budget: amplifier gains, ASE and NLI accumulation, SNR."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nli import Accumulation, NliGeometry, NliReport, accumulate_nli, epsilon_coherence, DEFAULT_FORMAT_CORRECTION
from .plan import ChannelPlan, Ideal, LinkSpec, Partial, as_power_vector
from .raman import DEFAULT_STEP, EffectiveRamanFit, attenuation_db, end_of_span, fit_effective_cr
from .units import H_PLANCK

POWER_FLOOR = 1e-12  # W


class LinkError(RuntimeError):
    pass


class PowerFloorError(LinkError):
    """A channel power collapsed below the numerical floor."""


@dataclass(frozen=True, eq=False)
class SpanState:
    span_index: int
    input_powers: np.ndarray
    output_powers: np.ndarray
    gains: np.ndarray
    post_amp_powers: np.ndarray


@dataclass(frozen=True, eq=False)
class SnrReport:
    launch: np.ndarray
    p_ase: np.ndarray
    p_nli: np.ndarray
    snr_linear: np.ndarray
    scenario: str = "ideal"

    @property
    def snr_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.snr_linear)

    @property
    def infinite(self) -> np.ndarray:
        return np.isinf(self.snr_linear)


@dataclass(frozen=True, eq=False)
class LinkResult:
    spans: list[SpanState]
    snr: SnrReport
    nli: NliReport
    fits: list[EffectiveRamanFit]


def assemble_snr(launch, p_ase, p_nli, scenario: str = "ideal") -> SnrReport:
    """SNR = launch / (ASE + NLI); a zero noise power gives ``inf`` rather than an error."""
    launch = np.asarray(launch, dtype=float)
    p_ase = np.asarray(p_ase, dtype=float)
    p_nli = np.asarray(p_nli, dtype=float)
    if not launch.shape == p_ase.shape == p_nli.shape:
        raise ValueError("launch, ASE and NLI vectors differ in length")
    if np.any(p_ase < 0) or np.any(p_nli < 0):
        raise ValueError("noise powers must be non-negative")
    noise = p_ase + p_nli
    with np.errstate(divide="ignore"):
        snr = np.where(noise > 0, launch / np.where(noise > 0, noise, 1.0), np.inf)
    return SnrReport(launch=launch, p_ase=p_ase, p_nli=p_nli, snr_linear=snr, scenario=scenario)


def ase_accumulate(plan: ChannelPlan, link: LinkSpec, span_states: list[SpanState]) -> np.ndarray:
    """ASE power per channel referred to the launch powers of the first span.

    Each amplifier adds ``n_pol h f (NF/2) (G - 1) B`` with ``n_pol`` the
    number of noise polarisations counted against the dual-polarisation
    signal (2 by default). Its ratio to the signal is
    frozen from that point on, so it is scaled by ``launch / post_amp``
    (1 for ideal equalisation). Gains below unity add nothing.

    With ``ase_gain="net-of-raman"`` the power exchanged by stimulated Raman
    scattering inside the span is treated as noiseless and the amplifier
    gain counted for ASE is the rest, ``exp(alpha L) * post / input``. That
    is the span loss under ideal equalisation and grows at reset amplifiers
    that recover accumulated tilt. ``"applied"`` uses the full applied gain.
    """
    if not span_states:
        raise ValueError("no span states")
    nf = 10 ** (link.amplifier.noise_figures(plan) / 10)
    n_pol = link.amplifier.ase_polarizations
    per_gain = n_pol * H_PLANCK * plan.frequencies * nf / 2 * plan.bandwidths
    launch = span_states[0].input_powers
    # states sharing the same gain and output arrays contribute identically
    counts: dict[tuple[int, int], list] = {}
    for state in span_states:
        key = (id(state.gains), id(state.post_amp_powers))
        counts.setdefault(key, [state, 0])[1] += 1
    total = np.zeros(len(plan))
    loss_gain = None
    if link.amplifier.ase_gain == "net-of-raman":
        loss_gain = 10 ** (attenuation_db(link.fiber, len(plan)) / 10)
    for state, count in counts.values():
        if loss_gain is None:
            gains = state.gains
        else:
            gains = loss_gain * state.post_amp_powers / state.input_powers
        excess = np.clip(gains - 1.0, 0.0, None)
        total += count * per_gain * excess * (launch / state.post_amp_powers)
    return total


class LinkModel:
    """Reusable propagation engine for one plan, link and set of formats.

    Construction precomputes everything that does not depend on the launch
    powers, so repeated :meth:`propagate` calls (the optimizer) stay cheap.
    Instances hold no mutable state between calls and may be shared.
    """

    def __init__(
        self,
        plan: ChannelPlan,
        link: LinkSpec,
        kurtosis=None,
        raman_step: float = DEFAULT_STEP,
        format_correction: float = DEFAULT_FORMAT_CORRECTION,
        epsilon: float | None = None,
    ):
        self.plan = plan
        self.link = link
        self.fiber = link.fiber
        self.raman_step = raman_step
        n = len(plan)
        self.kurtosis = None if kurtosis is None else np.broadcast_to(np.asarray(kurtosis, float), (n,)).copy()
        self.geometry = NliGeometry(plan, link.fiber, format_correction=format_correction)
        if epsilon is None:
            epsilon = epsilon_coherence(link.fiber, plan.total_bandwidth, n)
        self.epsilon = float(epsilon)
        self.loss_db = attenuation_db(link.fiber, n)

    def _span(self, inputs: np.ndarray):
        out = end_of_span(self.plan, inputs, self.fiber, step=self.raman_step)
        fit = fit_effective_cr(out, self.plan, inputs, self.fiber)
        report = self.geometry.evaluate(inputs, fit.per_channel_cr_hat, self.kurtosis)
        return out, fit, report

    def propagate(self, launch, recompute_spans: bool = False) -> LinkResult:
        launch = as_power_vector(launch, self.plan)
        eq = self.link.amplifier.equalization
        n_spans = self.link.n_spans
        if isinstance(eq, Ideal) and not recompute_spans:
            out, fit, report = self._span(launch)
            gains = launch / out
            state = SpanState(0, launch, out, gains, launch)
            states = [
                SpanState(s, launch, out, gains, launch) if s else state for s in range(n_spans)
            ]
            nli = accumulate_nli([report] * n_spans, Accumulation.HOMOGENEOUS, self.epsilon)
            fits = [fit]
        else:
            states, reports, fits = self._walk(launch, eq)
            distinct = {id(r) for r in reports}
            mode = Accumulation.HOMOGENEOUS if len(distinct) == 1 else Accumulation.PER_SPAN
            nli = accumulate_nli(reports, mode, self.epsilon)
        p_ase = ase_accumulate(self.plan, self.link, states)
        snr = assemble_snr(launch, p_ase, nli.p_nli, scenario=eq.name)
        return LinkResult(spans=states, snr=snr, nli=nli, fits=fits)

    def _walk(self, launch, eq):
        if isinstance(eq, Ideal):
            c, period = 1.0, 1
        elif isinstance(eq, Partial):
            c, period = eq.compensation_fraction, eq.reset_period
        else:
            raise TypeError(f"unknown equalization {eq!r}")
        cache: dict[bytes, tuple] = {}
        states, reports, fits = [], [], []
        inputs = launch
        for s in range(self.link.n_spans):
            key = inputs.tobytes()
            if key not in cache:
                cache[key] = self._span(inputs)
            out, fit, report = cache[key]
            if (s + 1) % period == 0:
                post = launch.copy()
                gains = launch / out
            else:
                net_db = 10.0 * np.log10(out / inputs)
                isrs_db = net_db + self.loss_db
                # loss fully restored, only the fraction c of the Raman tilt undone
                gains = 10 ** ((self.loss_db - c * isrs_db) / 10)
                post = out * gains
                if c == 1.0:
                    post, gains = inputs.copy(), inputs / out
            if np.any(post < POWER_FLOOR):
                ch = int(np.argmin(post))
                raise PowerFloorError(
                    f"channel {ch} fell to {post[ch]:.3e} W after span {s + 1}"
                )
            states.append(SpanState(s, inputs, out, gains, post))
            reports.append(report)
            if fit not in fits:
                fits.append(fit)
            inputs = post
        return states, reports, fits


def propagate_link(plan: ChannelPlan, launch, link: LinkSpec, formats=None, **kwargs):
    """One-shot propagation; returns ``(span_states, snr_report)``."""
    result = LinkModel(plan, link, kurtosis=formats, **kwargs).propagate(launch)
    return result.spans, result.snr
