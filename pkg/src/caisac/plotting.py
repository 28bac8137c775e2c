"""Plot emission from sweep CSVs.

Plots are derived from CSV contents only and are regenerated deterministically:
the SVG hash salt is pinned and date metadata suppressed.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "caisac"

import matplotlib.pyplot as plt  # noqa: E402

from .errors import PlotError

_KINDS = ("armse", "mi", "crlb", "bandwidth")


def _read_csv(csv_path) -> tuple[list, list]:
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PlotError(f"{csv_path}: empty CSV") from None
        rows = [row for row in reader if row]
    if not rows:
        raise PlotError(f"{csv_path}: no data rows")
    return header, rows


def _column(header, rows, name, convert=float):
    if name not in header:
        raise PlotError(f"unknown column {name!r}; CSV has {header}")
    idx = header.index(name)
    return [convert(row[idx]) for row in rows]


def build_figure(csv_path, kind: str):
    """Figure for one CSV; exposed separately so tests can inspect the axes."""
    if kind not in _KINDS:
        raise PlotError(f"unknown plot kind {kind!r}; choose from {_KINDS}")
    header, rows = _read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(7.0, 5.0))

    if kind == "armse":
        methods = sorted({row[header.index("method")] for row in rows}) \
            if "method" in header else []
        if not methods:
            raise PlotError("unknown column 'method'; CSV has " + str(header))
        for method in methods:
            sub = [row for row in rows if row[header.index("method")] == method]
            snr = _column(header, sub, "snr_db")
            for col, style in (("armse_range_m", "-o"), ("armse_velocity_mps", "--s")):
                ax.plot(snr, _column(header, sub, col), style, label=f"{method} {col}")
        ax.set_yscale("log")
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("ARMSE")
    elif kind == "mi":
        n_ues = sorted({int(float(row[header.index("n_ue")])) for row in rows}) \
            if "n_ue" in header else []
        if not n_ues:
            raise PlotError("unknown column 'n_ue'; CSV has " + str(header))
        for n_ue in n_ues:
            sub = [row for row in rows if int(float(row[header.index("n_ue")])) == n_ue]
            snr = _column(header, sub, "snr_db")
            for col in ("mi_single_low", "mi_single_high", "mi_ca"):
                ax.plot(snr, _column(header, sub, col), label=f"{col} (N_U={n_ue})")
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("mutual information (bits/frame)")
    elif kind == "crlb":
        tags = sorted({row[header.index("band_tag")] for row in rows}) \
            if "band_tag" in header else []
        if not tags:
            raise PlotError("unknown column 'band_tag'; CSV has " + str(header))
        for tag in tags:
            sub = [row for row in rows if row[header.index("band_tag")] == tag]
            snr = _column(header, sub, "snr_db")
            ax.plot(snr, _column(header, sub, "crlb_range"), "-o", label=f"{tag} range")
            ax.plot(snr, _column(header, sub, "crlb_velocity"), "--s", label=f"{tag} velocity")
        ax.set_yscale("log")
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("CRLB")
    else:
        n2 = _column(header, rows, "n2")
        ax.plot(n2, _column(header, rows, "crlb_range_m2_ca"), "-o", label="range CRLB")
        ax.plot(n2, _column(header, rows, "crlb_velocity_mps2_ca"), "--s", label="velocity CRLB")
        ax.set_yscale("log")
        ax.set_xlabel("high-band subcarriers N2")
        ax.set_ylabel("CRLB")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def emit_plot(csv_path, out_path, kind: str):
    """Render one CSV into a vector-graphic file (suffix picks the format)."""
    out_path = Path(out_path)
    fig = build_figure(csv_path, kind)
    try:
        fig.savefig(out_path, metadata={"Date": None})
    finally:
        plt.close(fig)
    return out_path
