"""Scenario runs behind the command line: simulate, optimize, rate sweep, validate."""
from __future__ import annotations

import csv
import itertools
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import SimulationConfig, dump_config, launch_powers_dbm
from .link import LinkModel, LinkResult
from .modem.constellation import square_qam
from .modem.formats import ChannelFormats
from .modem.gmi import GaussHermite, MonteCarlo, gmi, gmi_with_error
from .modem.rates import RateAssignment, gmi_bound, select_code_rates
from .nli import eta_closed_form, eta_oracle
from .optimizer import ThroughputObjective, optimize_launch, write_trace
from .plan import Band, ChannelPlan, build_channel_plan
from .raman import fit_effective_cr, solve_raman_ode
from .units import dbm_to_watt

log = logging.getLogger(__name__)

CHANNEL_COLUMNS = [
    "index",
    "freq_thz",
    "wavelength_nm",
    "band",
    "launch_dbm",
    "snr_db",
    "gmi_bits",
    "ngmi",
    "rate",
    "throughput_gbps",
]


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "" if np.isnan(v) else f"{v:.10g}"


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


@dataclass
class Scenario:
    """Everything built from a config that the runs share."""

    config: SimulationConfig
    plan: ChannelPlan
    formats: ChannelFormats
    model: LinkModel
    base_dir: Path | None = None

    @classmethod
    def from_config(cls, cfg: SimulationConfig, base_dir: Path | None = None) -> "Scenario":
        plan = cfg.build_plan()
        link = cfg.build_link()
        formats = cfg.build_formats(plan, base_dir)
        model = LinkModel(plan, link, kurtosis=formats.kurtosis, **cfg.link_kwargs())
        return cls(cfg, plan, formats, model, base_dir)

    @property
    def scenario_id(self) -> str:
        eq = self.model.link.amplifier.equalization
        bands = "".join(b.value for b in self.plan.present_bands())
        return f"{bands}-{eq.name}"


@dataclass
class SimulationReport:
    scenario_id: str
    plan: ChannelPlan
    launch_dbm: np.ndarray
    result: LinkResult
    gmi: np.ndarray
    ngmi: np.ndarray
    assignment: RateAssignment

    @property
    def snr_db(self) -> np.ndarray:
        return self.result.snr.snr_db

    @property
    def total_throughput(self) -> float:
        return self.assignment.total_throughput

    @property
    def gmi_bound(self) -> float:
        return float(np.sum(2.0 * self.plan.bandwidths * self.gmi))

    def channel_throughput(self) -> np.ndarray:
        a = self.assignment
        return 2.0 * a.symbol_rates * a.bits_per_symbol * np.nan_to_num(a.rates, nan=0.0)


def evaluate(scn: Scenario, launch_dbm: np.ndarray, k: int | None = None) -> SimulationReport:
    cfg = scn.config
    launch_dbm = np.asarray(launch_dbm, dtype=float)
    result = scn.model.propagate(dbm_to_watt(launch_dbm))
    g = scn.formats.gmi_exact(result.snr.snr_linear)
    n = scn.formats.ngmi(g)
    assignment = select_code_rates(
        n, scn.formats.bits, scn.plan.bandwidths, cfg.rates.k if k is None else k, cfg.rates.penalty
    )
    return SimulationReport(scn.scenario_id, scn.plan, launch_dbm, result, g, n, assignment)


def write_simulation(report: SimulationReport, out: Path, plots: bool = False) -> None:
    plan = report.plan
    tput = report.channel_throughput()
    rows = zip(
        range(len(plan)),
        plan.frequencies / 1e12,
        plan.wavelengths * 1e9,
        plan.bands,
        report.launch_dbm,
        report.snr_db,
        report.gmi,
        report.ngmi,
        report.assignment.rates,
        tput / 1e9,
    )
    write_csv(out / "channels.csv", CHANNEL_COLUMNS, rows)
    summary = []
    weights = 2.0 * plan.bandwidths
    for band in plan.present_bands():
        mask = plan.band_mask(band)
        summary.append(
            (report.scenario_id, Band(band).value, int(mask.sum()), tput[mask].sum() / 1e12,
             np.sum(weights[mask] * report.gmi[mask]) / 1e12)
        )
    summary.append(
        (report.scenario_id, "total", len(plan), report.total_throughput / 1e12, report.gmi_bound / 1e12)
    )
    write_csv(
        out / "summary.csv",
        ["scenario", "band", "n_channels", "throughput_tbps", "gmi_bound_tbps"],
        summary,
    )
    rate_rows = [(i + 1, r) for i, r in enumerate(report.assignment.rate_set)]
    write_csv(out / "rate_set.csv", ["rank", "rate"], rate_rows)
    if plots:
        from .plots import plot_channels

        plot_channels(out / "channels.csv", out / "fig_snr_launch.svg")


def _prepare(cfg: SimulationConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved.cfg").write_text(dump_config(cfg))


def run_simulate(cfg: SimulationConfig, powers_dbm=None, base_dir: Path | None = None) -> SimulationReport:
    out = Path(cfg.output.dir)
    _prepare(cfg, out)
    scn = Scenario.from_config(cfg, base_dir)
    if powers_dbm is None:
        powers_dbm = launch_powers_dbm(cfg, scn.plan, base_dir)
    report = evaluate(scn, powers_dbm)
    write_simulation(report, out, cfg.output.plots)
    return report


def write_powers(path: Path, plan: ChannelPlan, powers_dbm: np.ndarray) -> None:
    rows = zip(range(len(plan)), plan.frequencies / 1e12, plan.bands, powers_dbm)
    write_csv(path, ["index", "freq_thz", "band", "launch_dbm"], rows)


def run_optimize(cfg: SimulationConfig, base_dir: Path | None = None):
    out = Path(cfg.output.dir)
    _prepare(cfg, out)
    scn = Scenario.from_config(cfg, base_dir)
    obj = ThroughputObjective.from_model(scn.model, scn.formats)
    o = cfg.optimizer
    t0 = time.perf_counter()
    powers, value, opt = optimize_launch(
        obj,
        bounds=cfg.power_bounds(),
        pso_config=cfg.pso_config(),
        refine=o.refine,
        refine_kwargs={"step_db": o.refine_step, "tol": o.refine_tol * 1e12, "max_iters": o.refine_max_iters},
    )
    log.info("optimization: %.4f Tb/s after %d evaluations in %.1f s",
             value / 1e12, obj.evaluations, time.perf_counter() - t0)
    write_trace(out / "trace.csv", opt.pso)
    write_powers(out / "optimum_powers.csv", scn.plan, powers)
    report = evaluate(scn, powers)
    write_simulation(report, out, cfg.output.plots)
    return powers, report, opt


def run_rate_sweep(cfg: SimulationConfig, k_list=None, powers_dbm=None, base_dir: Path | None = None):
    out = Path(cfg.output.dir)
    _prepare(cfg, out)
    scn = Scenario.from_config(cfg, base_dir)
    if powers_dbm is None:
        powers_dbm = launch_powers_dbm(cfg, scn.plan, base_dir)
    report = evaluate(scn, powers_dbm)
    k_list = cfg.rates.k_sweep if k_list is None else k_list
    if not k_list:
        raise ValueError("k_list must not be empty")
    a = report.assignment
    rows = []
    for k in sorted(set(k_list)):
        sel = select_code_rates(report.ngmi, a.bits_per_symbol, a.symbol_rates, k, cfg.rates.penalty)
        rows.append((k, sel.total_throughput, sel.rate_set))
    bound = gmi_bound(np.clip(report.ngmi - cfg.rates.penalty, 0, 1), a.bits_per_symbol, a.symbol_rates)
    rows.append(("inf", bound, ()))
    write_csv(
        out / "rate_sweep.csv",
        ["k", "throughput_tbps", "fraction_of_bound", "rates"],
        [(k, t / 1e12, t / bound, " ".join(f"{r:.6f}" for r in rs)) for k, t, rs in rows],
    )
    if cfg.output.plots:
        from .plots import plot_rate_sweep

        plot_rate_sweep(out / "rate_sweep.csv", out / "fig_rate_sweep.svg")
    return rows


# -- validation suites ------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


@dataclass
class ValidationReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def check_raman_conservation(cfg: SimulationConfig, seed: int = 0) -> CheckResult:
    """Lossless fiber: the Raman terms only move power between channels."""
    plan = build_channel_plan({Band.C: 20}, 500e9, 1550e-9, band_edges_nm={Band.C: (1480.0, 1620.0)})
    fiber = cfg.build_fiber().with_(attenuation=0.0)
    rng = np.random.default_rng(seed)
    launch = dbm_to_watt(rng.uniform(-5.0, 10.0, len(plan)))
    profile = solve_raman_ode(plan, launch, fiber, step=cfg.nli.raman_step)
    total = profile.powers.sum(axis=1)
    worst = float(np.max(np.abs(total / total[0] - 1.0)))
    return CheckResult("raman_conservation", worst <= 1e-6, f"max relative drift {worst:.3e} (limit 1e-6)")


def oracle_instance(cfg: SimulationConfig):
    """Small single-span C-band instance for the closed form versus the reference integral."""
    n = cfg.oracle.channels
    plan = build_channel_plan({Band.C: n}, 50e9, 1550e-9)
    fiber = cfg.build_fiber()
    launch = np.full(n, 1e-3)
    profile = solve_raman_ode(plan, launch, fiber, step=cfg.nli.raman_step)
    fit = fit_effective_cr(profile, plan, launch, fiber)
    return plan, fiber, launch, profile, fit


def check_closed_form(cfg: SimulationConfig) -> CheckResult:
    plan, fiber, launch, profile, fit = oracle_instance(cfg)
    closed = eta_closed_form(plan, launch, fiber, fit, format_correction=cfg.nli.format_correction).eta_total
    gaps = []
    for i in range(len(plan)):
        ref = eta_oracle(plan, launch, fiber, profile, i, n_mc=cfg.oracle.n_mc, seed=cfg.oracle.seed)
        gaps.append(10 * np.log10(closed[i] / ref.eta))
    worst = float(np.max(np.abs(gaps)))
    tol = cfg.oracle.tolerance_db
    return CheckResult(
        "closed_form_vs_oracle", worst <= tol,
        f"max |gap| {worst:.3f} dB over {len(plan)} channels (limit {tol} dB)",
    )


def brute_force_rates(ngmi, m, rs, k) -> float:
    """Best throughput over every candidate set of at most ``k`` observed NGMI values."""
    cands = np.unique(ngmi)
    w = 2.0 * rs * m
    best = 0.0
    for size in range(1, min(k, cands.size) + 1):
        for subset in itertools.combinations(cands, size):
            sel = np.array(subset)
            pos = np.searchsorted(sel, ngmi, side="right") - 1
            r = np.where(pos >= 0, sel[np.maximum(pos, 0)], 0.0)
            best = max(best, float(np.sum(w * r)))
    return best


def check_rate_dp(seed: int = 0, trials: int = 100) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(trials):
        n = int(rng.integers(1, 13))
        k = int(rng.integers(1, 4))
        ngmi = rng.uniform(0.0, 1.0, n)
        m = rng.choice([4.0, 6.0], n)
        dp = select_code_rates(ngmi, m, 50e9, k).total_throughput
        ref = brute_force_rates(ngmi, m, 50e9, k)
        if not np.isclose(dp, ref, rtol=1e-12, atol=0.0):
            bad += 1
    return CheckResult("rate_dp_vs_exhaustive", bad == 0, f"{bad} of {trials} instances differ")


def check_gmi_asymptotes(seed: int = 0) -> CheckResult:
    qpsk = square_qam(2)
    high = gmi(qpsk, 10**4.0)
    low = gmi(qpsk, 10**-3.0)
    sigmas = []
    for snr_db in (0.0, 7.0, 11.0):
        snr = 10 ** (snr_db / 10)
        gh = gmi(qpsk, snr, GaussHermite())
        mc, se = gmi_with_error(qpsk, snr, MonteCarlo(1_000_000, seed))
        sigmas.append(abs(gh - mc) / se)
    ok = abs(high - 2.0) <= 1e-3 and low <= 0.01 and max(sigmas) <= 3.0
    return CheckResult(
        "gmi_asymptotes", ok,
        f"GMI(40 dB)={high:.6f}, GMI(-30 dB)={low:.2e}, worst |GH-MC| at 0/7/11 dB = {max(sigmas):.2f} sigma",
    )


def run_validate(cfg: SimulationConfig) -> ValidationReport:
    out = Path(cfg.output.dir)
    _prepare(cfg, out)
    report = ValidationReport()
    suites = [
        lambda: check_raman_conservation(cfg, cfg.oracle.seed),
        lambda: check_closed_form(cfg),
        lambda: check_rate_dp(cfg.oracle.seed),
        lambda: check_gmi_asymptotes(cfg.oracle.seed),
    ]
    for suite in suites:
        t0 = time.perf_counter()
        try:
            result = suite()
        except Exception as exc:  # a crashing check is a failed check
            result = CheckResult(getattr(suite, "__name__", "check"), False, f"error: {exc}")
        result.seconds = time.perf_counter() - t0
        report.checks.append(result)
        log.info("%s: %s (%s)", result.name, "pass" if result.passed else "FAIL", result.detail)
    write_csv(
        out / "validation.csv",
        ["check", "passed", "detail"],
        [(c.name, "true" if c.passed else "false", c.detail) for c in report.checks],
    )
    return report
