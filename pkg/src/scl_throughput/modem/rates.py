"""Selecting a small set of FEC code rates that maximises total throughput."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class RateAssignment:
    rate_set: tuple[float, ...]
    rates: np.ndarray  # per channel, NaN where no rate fits
    bits_per_symbol: np.ndarray
    symbol_rates: np.ndarray

    @property
    def total_throughput(self) -> float:
        return throughput(self)


def throughput(assignment: RateAssignment) -> float:
    """Net bit rate in bit/s, two polarisations per channel."""
    r = np.nan_to_num(assignment.rates, nan=0.0)
    return float(np.sum(2.0 * assignment.symbol_rates * assignment.bits_per_symbol * r))


def gmi_bound(ngmi, m, symbol_rate) -> float:
    """Throughput with one ideal code per channel, sum 2 Rs m NGMI."""
    ngmi, m = np.asarray(ngmi, float), np.asarray(m, float)
    rs = np.broadcast_to(np.asarray(symbol_rate, float), ngmi.shape)
    return float(np.sum(2.0 * rs * m * ngmi))


def select_code_rates(ngmi, m, symbol_rate, K: int, penalty: float = 0.0) -> RateAssignment:
    """Choose at most ``K`` rates from the observed NGMI values, exactly.

    A channel runs the largest selected rate not above its NGMI (minus an
    optional implementation ``penalty``); channels below every selected rate
    carry nothing. Sorting channels by NGMI, a selected rate serves the
    contiguous run of channels from its own position up to the next selected
    rate, which gives an O(N^2 K) dynamic programme.
    """
    if K < 1:
        raise ValueError("need at least one code rate (K >= 1)")
    ngmi = np.asarray(ngmi, dtype=float)
    if ngmi.ndim != 1 or ngmi.size == 0:
        raise ValueError("ngmi must be a non-empty 1-D array")
    if np.any(ngmi < -1e-12) or np.any(ngmi > 1 + 1e-12):
        raise ValueError("ngmi values must lie in [0, 1]")
    m = np.broadcast_to(np.asarray(m, dtype=float), ngmi.shape).copy()
    rs = np.broadcast_to(np.asarray(symbol_rate, dtype=float), ngmi.shape).copy()
    usable = np.clip(ngmi - penalty, 0.0, 1.0)

    order = np.argsort(usable, kind="stable")
    u = usable[order]
    w = (2.0 * rs * m)[order]
    n = u.size
    cum = np.concatenate([[0.0], np.cumsum(w)])

    # best[j]: best value of channels j.. with a rate at u[j] and <= k rates in total
    stop = u * (cum[n] - cum[:n])
    best = stop
    nxt = [np.full(n, -1)]
    for _ in range(1, K):
        new = stop.copy()
        choice = np.full(n, -1)
        for j in range(n - 1):
            cand = u[j] * (cum[j + 1 : n] - cum[j]) + best[j + 1 :]
            # prefer the larger next rate on ties
            jj = n - 2 - j - int(np.argmax(cand[::-1]))
            if cand[jj] > new[j]:
                new[j] = cand[jj]
                choice[j] = j + 1 + jj
        best = new
        nxt.append(choice)

    start = n - 1 - int(np.argmax(best[::-1]))
    chosen = []
    j, k = start, K - 1
    while j >= 0:
        chosen.append(j)
        j = nxt[k][j] if k > 0 else -1
        k -= 1
    rate_set = tuple(sorted({float(u[j]) for j in chosen if u[j] > 0}))

    sel = np.array(rate_set)
    rates = np.full(n, np.nan)
    if sel.size:
        pos = np.searchsorted(sel, usable, side="right") - 1
        ok = pos >= 0
        rates[ok] = sel[pos[ok]]
    return RateAssignment(rate_set=rate_set, rates=rates, bits_per_symbol=m, symbol_rates=rs)
