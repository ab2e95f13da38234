"""Artifact emission: deterministic CSV files, run manifests, and figures."""

from __future__ import annotations

import csv
import hashlib
import json
from fractions import Fraction
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def format_value(v) -> str:
    if isinstance(v, bool) or isinstance(v, np.bool_):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, Fraction):
        return f"{float(v):.6g}"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


def write_csv(path: Path, header: list[str], rows: list[tuple]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def write_manifest(path: Path, manifest: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def save_figure(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt = _pyplot()
    plt.close(fig)
    return path


def staircase_figure(path: Path, curve, bits: int, vdd: float) -> Path:
    plt = _pyplot()
    vins = [v for v, _ in curve]
    codes = [c for _, c in curve]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.step(vins, codes, where="post", lw=1.0, label="measured")
    n = 1 << bits
    ideal = [min(int(v / vdd * n), n - 1) for v in vins]
    ax.step(vins, ideal, where="post", lw=0.8, ls="--", color="gray", label="ideal")
    ax.set_xlabel("input voltage (V)")
    ax.set_ylabel("output code")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return save_figure(fig, path)


def timeline_figure(path: Path, entries) -> Path:
    plt = _pyplot()
    arrays = sorted({e.array for e in entries})
    busy_states = {"compare", "flash-ref", "sar-dac"}
    colors = {"compare": "#2196F3", "flash-ref": "#FF9800", "sar-dac": "#4CAF50"}
    fig, ax = plt.subplots(figsize=(6, 2.5))
    for i, name in enumerate(arrays):
        for e in entries:
            if e.array != name or e.state not in busy_states:
                continue
            ax.broken_barh([(e.cycle - 0.45, 0.9)], (i - 0.35, 0.7),
                           color=colors[e.state])
    ax.set_yticks(range(len(arrays)), arrays)
    ax.set_xlabel("cycle")
    ax.grid(axis="x", alpha=0.3)
    handles = [plt.Rectangle((0, 0), 1, 1, color=c) for c in colors.values()]
    ax.legend(handles, colors.keys(), fontsize=7, ncol=3, loc="upper right")
    return save_figure(fig, path)


def dnl_inl_figure(path: Path, dnl, inl) -> Path:
    plt = _pyplot()
    codes = np.arange(len(dnl))
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    ax0.bar(codes, dnl, width=0.9)
    ax0.set_ylabel("DNL (LSB)")
    ax0.grid(alpha=0.3)
    ax1.plot(codes, inl, marker=".", lw=1.0)
    ax1.set_ylabel("INL (LSB)")
    ax1.set_xlabel("output code")
    ax1.grid(alpha=0.3)
    return save_figure(fig, path)


def pmf_figure(path: Path, probs, depths_opt, depths_bal) -> Path:
    plt = _pyplot()
    codes = np.arange(len(probs))
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    ax0.bar(codes, probs, width=0.9)
    ax0.set_ylabel("probability")
    ax0.grid(alpha=0.3)
    ax1.step(codes, depths_opt, where="mid", label="asymmetric")
    ax1.step(codes, depths_bal, where="mid", ls="--", label="balanced")
    ax1.set_ylabel("comparisons")
    ax1.set_xlabel("output code")
    ax1.legend(fontsize=8)
    ax1.grid(alpha=0.3)
    return save_figure(fig, path)


def latency_figure(path: Path, rows) -> Path:
    # rows: (style, bits, cycles)
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    styles = sorted({r[0] for r in rows})
    for style in styles:
        pts = sorted((r[1], r[2]) for r in rows if r[0] == style)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=style)
    ax.set_xlabel("bit precision")
    ax.set_ylabel("cycles per conversion")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return save_figure(fig, path)


def workload_figure(path: Path, rows) -> Path:
    # rows: (threshold, mode, mean_planes)
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    modes = sorted({r[1] for r in rows})
    for mode in modes:
        pts = sorted((r[0], r[2]) for r in rows if r[1] == mode)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=mode)
    ax.set_xlabel("threshold")
    ax.set_ylabel("mean planes processed")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return save_figure(fig, path)


def transform_cost_figure(path: Path, rows) -> Path:
    # rows: (length, bwht_adds, dense_macs)
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    lengths = [r[0] for r in rows]
    ax.plot(lengths, [r[1] for r in rows], marker="o", label="blockwise transform adds")
    ax.plot(lengths, [r[2] for r in rows], marker="s", ls="--", label="dense matrix MACs")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log", base=2)
    ax.set_xlabel("transform length")
    ax.set_ylabel("operations")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, which="both")
    return save_figure(fig, path)
