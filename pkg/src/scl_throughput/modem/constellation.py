from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ConstellationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Constellation:
    """Bit-labelled 2D point set with uniform probabilities.

    Points are rescaled to unit mean energy on construction. ``labels[i]``
    is the integer whose binary expansion is the bit word of ``points[i]``
    (most significant bit first when written out).
    """

    points: np.ndarray
    labels: np.ndarray
    name: str = ""
    bits: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex).ravel()
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        size = pts.size
        if size < 2 or size & (size - 1):
            raise ConstellationError(f"constellation size {size} is not a power of two")
        if labels.shape != pts.shape:
            raise ConstellationError("one label per point required")
        if not np.array_equal(np.sort(labels), np.arange(size)):
            raise ConstellationError("bit labels are not a bijection onto {0,1}^m")
        energy = np.mean(np.abs(pts) ** 2)
        if not energy > 0:
            raise ConstellationError("constellation has zero energy")
        pts = pts / np.sqrt(energy)
        m = size.bit_length() - 1
        bits = (labels[:, None] >> np.arange(m - 1, -1, -1)[None, :]) & 1
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "bits", bits.astype(np.int8))

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def m(self) -> int:
        return self.size.bit_length() - 1

    @property
    def mu2(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    @property
    def mu4(self) -> float:
        return float(np.mean(np.abs(self.points) ** 4))

    @property
    def excess_kurtosis(self) -> float:
        return excess_kurtosis(self)

    def with_points(self, points: np.ndarray, name: str | None = None) -> "Constellation":
        return Constellation(points, self.labels, self.name if name is None else name)

    def to_file(self, path: str | Path) -> None:
        lines = []
        for x, bits in zip(self.points, self.bits):
            word = "".join(str(int(b)) for b in bits)
            lines.append(f"{float(x.real)!r} {float(x.imag)!r} {word}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_file(cls, path: str | Path, name: str | None = None) -> "Constellation":
        """Read ``re im bits`` lines; blank lines and ``#`` comments are skipped."""
        pts, labels, width = [], [], None
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3 or set(parts[2]) - {"0", "1"}:
                raise ConstellationError(f"{path}:{lineno}: expected 're im bits', got {raw!r}")
            if width is None:
                width = len(parts[2])
            elif len(parts[2]) != width:
                raise ConstellationError(f"{path}:{lineno}: bit word length changes")
            pts.append(complex(float(parts[0]), float(parts[1])))
            labels.append(int(parts[2], 2))
        if width is not None and len(pts) != 2**width:
            raise ConstellationError(f"{path}: {len(pts)} points for {width}-bit labels")
        return cls(np.array(pts), np.array(labels), name or Path(path).stem)


def excess_kurtosis(constellation: Constellation) -> float:
    """mu4 / mu2^2 - 2 under uniform point probabilities."""
    mu2 = constellation.mu2
    return constellation.mu4 / mu2**2 - 2.0


def _gray(n: int) -> np.ndarray:
    k = np.arange(n)
    return k ^ (k >> 1)


def square_qam(m: int) -> Constellation:
    """Gray-labelled square QAM with 2**m points (m even)."""
    if m < 2 or m % 2:
        raise ConstellationError("square QAM needs an even number of bits per symbol")
    side = 2 ** (m // 2)
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    gray = _gray(side)
    ii, qq = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    points = levels[ii] + 1j * levels[qq]
    labels = (gray[ii] << (m // 2)) | gray[qq]
    return Constellation(points.ravel(), labels.ravel(), f"{2**m}QAM")
