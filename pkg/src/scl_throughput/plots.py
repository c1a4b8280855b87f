"""Optional SVG rendering of the CSV outputs (needs matplotlib)."""
from __future__ import annotations

import csv
from pathlib import Path


def _read(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_channels(channels_csv: Path, out: Path) -> None:
    """SNR and launch power versus wavelength, one panel each."""
    plt = _pyplot()
    rows = _read(channels_csv)
    wl = [float(r["wavelength_nm"]) for r in rows]
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    ax1.plot(wl, [float(r["snr_db"]) for r in rows], ".", ms=3)
    ax1.set_ylabel("SNR [dB]")
    ax2.plot(wl, [float(r["launch_dbm"]) for r in rows], ".", ms=3)
    ax2.set_ylabel("launch power [dBm]")
    ax2.set_xlabel("wavelength [nm]")
    fig.tight_layout()
    fig.savefig(out, metadata={"Date": None})
    plt.close(fig)


def plot_rate_sweep(sweep_csv: Path, out: Path) -> None:
    plt = _pyplot()
    rows = _read(sweep_csv)
    finite = [r for r in rows if r["k"] != "inf"]
    bound = [float(r["throughput_tbps"]) for r in rows if r["k"] == "inf"]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([int(r["k"]) for r in finite], [float(r["throughput_tbps"]) for r in finite], "o-", label="code rates")
    if bound:
        ax.axhline(bound[0], ls="--", color="k", label="GMI bound")
    ax.set_xlabel("number of code rates")
    ax.set_ylabel("throughput [Tb/s]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, metadata={"Date": None})
    plt.close(fig)
