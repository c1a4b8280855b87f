"""Geometric shaping by finite-difference gradient ascent on the GMI."""
from __future__ import annotations

import logging

import numpy as np

from .constellation import Constellation, ConstellationError, square_qam
from .gmi import LN2, GaussHermite, PrecisionError, gmi

log = logging.getLogger(__name__)

SUPPORTED_BITS = (4, 6)


class _Quadrature:
    """Gauss-Hermite noise nodes for the 2D AWGN expectation."""

    def __init__(self, snr_linear: float, order: int):
        if order < 4:
            raise PrecisionError("Gauss-Hermite order below 4")
        t, w = np.polynomial.hermite.hermgauss(order)
        tr, ti = np.meshgrid(t, t, indexing="ij")
        self.sigma2 = 1.0 / snr_linear
        self.nodes = np.sqrt(self.sigma2) * (tr + 1j * ti).ravel()
        self.weights = (np.outer(w, w) / np.pi).ravel()


def _metric(y, pts, sigma2):
    diff = y[..., None] - pts
    return -(diff.real**2 + diff.imag**2) / sigma2


def _loss(lik, same):
    """sum_b ln(total / same-bit sum); lik [..., K], same [m, ..., K] broadcastable."""
    total = lik.sum(axis=-1)
    return sum(np.log(total / (lik * s).sum(axis=-1)) for s in same)


def fd_gradient(points: np.ndarray, bits: np.ndarray, quad: _Quadrature, h: float = 1e-4) -> np.ndarray:
    """Central-difference gradient of the GMI w.r.t. every point (complex: d/dRe + i d/dIm).

    Moving point ``j`` only changes column ``j`` of every received sample's
    metric plus the samples transmitted from ``j`` itself, so each of the
    four probes per point is evaluated incrementally from the base state.
    """
    size, m = bits.shape
    sigma2, nodes, w = quad.sigma2, quad.nodes, quad.weights
    y = points[:, None] + nodes[None, :]  # [A, Q]
    metric = _metric(y, points, sigma2)  # [A, Q, K]
    shift = metric.max(axis=-1)
    lik = np.exp(metric - shift[..., None])
    # same[b, a, k]: bit b of point k equals bit b of point a
    same = (bits.T[:, :, None] == bits.T[:, None, :]).astype(float)
    total = lik.sum(axis=-1)
    same_sums = np.einsum("aqk,bak->baq", lik, same)
    base = np.log(total)[None] - np.log(same_sums)  # [b, A, Q]
    base_loss = base.sum(axis=0)  # [A, Q]
    own = np.arange(size)
    noise_self = -(np.abs(nodes) ** 2) / sigma2

    def probe(delta):
        moved = points + delta  # candidate j moved, one probe per j
        # columns: sample (a, q) against moved point j
        new_col = np.exp(_metric(y, moved, sigma2) - shift[..., None])  # [A, Q, J]
        d_lik = new_col - lik  # lik[a, q, j] is the old column j
        t_new = total[..., None] + d_lik
        loss = np.zeros_like(d_lik)
        for b in range(m):
            s_new = same_sums[b][..., None] + d_lik * same[b][:, None, :]
            loss += np.log(t_new / s_new)
        change = ((loss - base_loss[..., None]) * w[None, :, None]).sum(axis=(0, 1))
        # rows a == j were counted above with the wrong received sample; replace them
        diag = ((loss[own, :, own] - base_loss) * w).sum(axis=1)
        y_row = moved[:, None] + nodes[None, :]  # [J, Q]
        row_metric = _metric(y_row, points, sigma2)  # [J, Q, K]
        row_metric[own, :, own] = noise_self
        row_lik = np.exp(row_metric - row_metric.max(axis=-1, keepdims=True))
        row_loss = _loss(row_lik, same[:, :, None, :])
        row_change = ((row_loss - base_loss) * w).sum(axis=1)
        d_loss = change - diag + row_change
        return -d_loss / (size * LN2)

    g_re = (probe(h) - probe(-h)) / (2 * h)
    g_im = (probe(1j * h) - probe(-1j * h)) / (2 * h)
    return g_re + 1j * g_im


def _normalize(points):
    return points / np.sqrt(np.mean(np.abs(points) ** 2))


def shape_constellation(
    m: int,
    target_snr_db: float,
    seed: int = 0,
    iters: int = 400,
    step: float = 0.1,
    order: int = 10,
    jitter: float = 0.3,
) -> Constellation:
    """Gradient ascent of the GMI at ``target_snr_db`` starting from Gray square QAM.

    The gradient is taken by central finite differences and normalised to a
    unit largest component, so ``step`` is the largest per-iteration point
    displacement. The step decays by 0.9 every 50 iterations and the point
    set is re-normalised to unit energy after each move. ``seed`` drives a
    random initial perturbation that breaks the symmetry of the square grid.
    The best iterate (by GMI) is returned, so the result never scores below
    the starting QAM.
    """
    if m not in SUPPORTED_BITS:
        raise ConstellationError(f"shaping supports m in {SUPPORTED_BITS}, got {m}")
    start = square_qam(m)
    snr = 10 ** (target_snr_db / 10)
    quad = _Quadrature(snr, order)
    method = GaussHermite(order)
    rng = np.random.default_rng(seed)

    best_pts = start.points
    best_val = gmi(start, snr, method)
    pts = start.points.copy()
    if iters > 0:
        pts = _normalize(pts + jitter * (rng.standard_normal(pts.size) + 1j * rng.standard_normal(pts.size)))
    lr = step
    for it in range(iters):
        if it and it % 50 == 0:
            lr *= 0.9
        grad = fd_gradient(pts, start.bits, quad)
        scale = np.max(np.abs(grad))
        if scale == 0:
            break
        pts = _normalize(pts + lr * grad / scale)
        val = gmi(start.with_points(pts), snr, method)
        if val > best_val:
            best_val, best_pts = val, pts.copy()
        if it % 50 == 0:
            log.debug("shaping m=%d iter %d gmi=%.5f", m, it, val)
    name = f"GS{2**m}@{target_snr_db:g}dB"
    return start.with_points(best_pts, name=name)
