"""Per-channel modulation formats resolved from a band-to-constellation map."""
from __future__ import annotations

import numpy as np

from ..plan import Band, ChannelPlan
from .constellation import Constellation
from .gmi import GaussHermite, gmi, gmi_curve, ngmi


class ChannelFormats:
    """Which constellation every channel of a plan carries."""

    def __init__(self, plan: ChannelPlan, by_band: dict):
        table = {Band(k).value: v for k, v in by_band.items()}
        missing = {Band(b).value for b in plan.present_bands()} - set(table)
        if missing:
            raise ValueError(f"no modulation format for band(s) {sorted(missing)}")
        self.plan = plan
        self.by_band = {Band(b).value: table[Band(b).value] for b in plan.present_bands()}
        self.names = list(self.by_band)
        index = {b: i for i, b in enumerate(self.names)}
        self.group = np.array([index[b] for b in plan.bands])
        cons = [self.by_band[b] for b in self.names]
        self.kurtosis = np.array([c.excess_kurtosis for c in cons])[self.group]
        self.bits = np.array([c.m for c in cons], dtype=float)[self.group]
        self._curves = None

    def constellation(self, i: int) -> Constellation:
        return self.by_band[self.names[self.group[i]]]

    def gmi_interp(self, snr_db: np.ndarray) -> np.ndarray:
        """Tabulated GMI per channel; the fast path used inside the optimizer."""
        if self._curves is None:
            self._curves = [gmi_curve(self.by_band[b]) for b in self.names]
        out = np.empty(len(self.group))
        for g, curve in enumerate(self._curves):
            sel = self.group == g
            out[sel] = curve(snr_db[sel])
        return out

    def gmi_exact(self, snr_linear: np.ndarray, order: int = 20) -> np.ndarray:
        """Direct quadrature per channel, for final reports."""
        method = GaussHermite(order)
        out = np.empty(len(self.group))
        for i, snr in enumerate(snr_linear):
            c = self.constellation(i)
            out[i] = float(c.m) if np.isinf(snr) else gmi(c, float(snr), method)
        return out

    def ngmi(self, gmi_values: np.ndarray) -> np.ndarray:
        return ngmi(np.clip(gmi_values, 0.0, self.bits), self.bits)
