"""Generalized mutual information of bit-interleaved coded modulation over AWGN."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import PchipInterpolator

from .constellation import Constellation

LN2 = np.log(2.0)


class PrecisionError(ValueError):
    """Requested quadrature or sample size is too small to be trusted."""


@dataclass(frozen=True)
class GaussHermite:
    order: int = 20


@dataclass(frozen=True)
class MonteCarlo:
    n: int = 1_000_000
    seed: int = 0


def _bit_loss(constellation: Constellation, tx: np.ndarray, noise: np.ndarray, sigma2: float):
    """Sum over bits of log2(sum_all / sum_same_bit) for each (tx index, noise) pair.

    ``tx`` has shape [A], ``noise`` shape [A, Q]; returns [A, Q].
    """
    pts = constellation.points
    bits = constellation.bits
    y = pts[tx][:, None] + noise  # [A, Q]
    diff = y[:, :, None] - pts[None, None, :]
    metric = -(diff.real**2 + diff.imag**2) / sigma2  # [A, Q, M]
    metric -= metric.max(axis=-1, keepdims=True)
    lik = np.exp(metric)
    total = lik.sum(axis=-1)
    loss = np.zeros(y.shape)
    for b in range(constellation.m):
        same = (bits[:, b][None, :] == bits[tx, b][:, None]).astype(float)  # [A, M]
        # the transmitted point is always in its own subset, so this never underflows to 0
        loss += np.log(total / np.einsum("aqm,am->aq", lik, same))
    return loss / LN2


def gmi(constellation: Constellation, snr_linear: float, method=None) -> float:
    """GMI in bit per 2D symbol with noise variance ``1/snr`` per complex sample."""
    value, _ = gmi_with_error(constellation, snr_linear, method)
    return value


def gmi_with_error(constellation: Constellation, snr_linear: float, method=None) -> tuple[float, float]:
    """GMI and its Monte-Carlo standard error (0 for quadrature)."""
    method = GaussHermite() if method is None else method
    if not snr_linear > 0:
        raise ValueError("snr must be positive")
    sigma2 = 1.0 / snr_linear
    m = constellation.m
    if isinstance(method, GaussHermite):
        if method.order < 4:
            raise PrecisionError("Gauss-Hermite order below 4")
        t, w = np.polynomial.hermite.hermgauss(method.order)
        tr, ti = np.meshgrid(t, t, indexing="ij")
        weights = (np.outer(w, w) / np.pi).ravel()
        nodes = np.sqrt(sigma2) * (tr + 1j * ti).ravel()
        tx = np.arange(constellation.size)
        noise = np.broadcast_to(nodes, (tx.size, nodes.size))
        loss = _bit_loss(constellation, tx, noise, sigma2) @ weights
        return float(np.clip(m - loss.mean(), 0.0, m)), 0.0
    if isinstance(method, MonteCarlo):
        if method.n < 10_000:
            raise PrecisionError("Monte-Carlo GMI needs at least 1e4 samples")
        rng = np.random.default_rng(method.seed)
        total, total_sq, done = 0.0, 0.0, 0
        chunk = max(1, 2**20 // constellation.size)
        while done < method.n:
            size = min(chunk, method.n - done)
            tx = rng.integers(constellation.size, size=size)
            noise = np.sqrt(sigma2 / 2) * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
            loss = _bit_loss(constellation, tx, noise[:, None], sigma2)[:, 0]
            total += loss.sum()
            total_sq += (loss**2).sum()
            done += size
        mean = total / method.n
        var = (total_sq / method.n - mean**2) * method.n / (method.n - 1)
        return float(m - mean), float(np.sqrt(max(var, 0.0) / method.n))
    raise TypeError(f"unknown GMI method {method!r}")


def ngmi(gmi_value, m):
    """Normalized GMI, 1 - (m - GMI)/m."""
    gmi_value = np.asarray(gmi_value, dtype=float)
    m = np.asarray(m, dtype=float)
    if np.any(gmi_value < -1e-12) or np.any(gmi_value > m + 1e-12):
        raise ValueError("GMI outside [0, m]")
    return 1.0 - (m - gmi_value) / m


class GmiCurve:
    """GMI versus SNR tabulated once and interpolated monotonically.

    Used wherever many channels need a GMI per evaluation (the optimizer
    objective); direct quadrature stays the reference.
    """

    def __init__(self, constellation: Constellation, snr_db_min=-15.0, snr_db_max=35.0, step_db=0.25, order=20):
        self.constellation = constellation
        self.snr_db = np.arange(snr_db_min, snr_db_max + step_db / 2, step_db)
        values = np.array([gmi(constellation, 10 ** (s / 10), GaussHermite(order)) for s in self.snr_db])
        # quadrature round-off can break monotonicity by ~1e-12
        values = np.maximum.accumulate(values)
        self.values = values
        self._interp = PchipInterpolator(self.snr_db, values, extrapolate=False)

    def __call__(self, snr_db) -> np.ndarray:
        """Interpolated GMI. Below the grid GMI is taken proportional to the
        linear SNR (its low-SNR behaviour); above it the top value is held."""
        snr_db = np.asarray(snr_db, dtype=float)
        clipped = np.clip(snr_db, self.snr_db[0], self.snr_db[-1])
        out = self._interp(clipped)
        below = snr_db < self.snr_db[0]
        if np.any(below):
            out = np.where(below, self.values[0] * 10 ** ((snr_db - self.snr_db[0]) / 10), out)
        return out


@lru_cache(maxsize=16)
def _curve_cached(points_key: bytes, labels_key: bytes, order: int) -> GmiCurve:
    pts = np.frombuffer(points_key, dtype=complex)
    labels = np.frombuffer(labels_key, dtype=np.int64)
    return GmiCurve(Constellation(pts, labels), order=order)


def gmi_curve(constellation: Constellation, order: int = 20) -> GmiCurve:
    return _curve_cached(constellation.points.tobytes(), constellation.labels.tobytes(), order)
