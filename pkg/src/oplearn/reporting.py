"""Artifact writers: delimited tables, JSON, SVG scatter plots, manifests.

Everything written here is byte-deterministic: floats use shortest
round-trip formatting, JSON is sorted, SVG coordinates are fixed-precision,
and nothing embeds timestamps or absolute paths. Re-running a command with
identical inputs reproduces identical artifact bytes, which the run manifest
(config hash, input hash, artifact hashes) makes checkable.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PALETTE = (
    "#4477aa",
    "#ee6677",
    "#228833",
    "#ccbb44",
    "#66ccee",
    "#aa3377",
    "#bbbbbb",
)


def fmt(value: object) -> str:
    """Canonical text for one table cell (shortest round-trip for floats)."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def write_json(path: Path, payload: object) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"empty file: {path}")
    return rows[0], rows[1:]


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: Path) -> str:
    return sha256_bytes(path.read_bytes())


def write_manifest(
    outdir: Path,
    *,
    config_payload: object,
    input_path: Path | None,
    artifact_names: Sequence[str],
) -> Path:
    """Record hashes of the run configuration, input, and artifacts."""
    manifest = {
        "config_sha256": sha256_bytes(
            json.dumps(config_payload, sort_keys=True).encode()
        ),
        "input_sha256": sha256_file(input_path) if input_path else None,
        "artifacts": {
            name: sha256_file(outdir / name) for name in sorted(artifact_names)
        },
    }
    path = outdir / "manifest.json"
    write_json(path, manifest)
    return path


def _ticks(lo: float, hi: float, count: int = 5) -> np.ndarray:
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, count)


def scatter_svg(
    x: np.ndarray,
    y: np.ndarray,
    color_index: np.ndarray,
    *,
    title: str,
    xlabel: str = "sigma (risk)",
    ylabel: str = "mu (return)",
    legend_labels: Sequence[str] = (),
    width: int = 640,
    height: int = 480,
) -> str:
    """Static scatter plot as an SVG document string.

    Points are coloured by ``color_index`` (arm index modulo the palette).
    Output is deterministic for identical inputs.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    color_index = np.asarray(color_index, dtype=np.int64)
    left, right, top, bottom = 62, 18, 34, 48
    plot_w = width - left - right
    plot_h = height - top - bottom

    def span(values: np.ndarray) -> tuple[float, float]:
        lo, hi = float(values.min()), float(values.max())
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.05 * (hi - lo)
        return lo - pad, hi + pad

    x_lo, x_hi = span(x)
    y_lo, y_hi = span(y)

    def px(v: float) -> float:
        return left + (v - x_lo) / (x_hi - x_lo) * plot_w

    def py(v: float) -> float:
        return top + plot_h - (v - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.2f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
        f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#333333" stroke-width="1"/>',
    ]
    for tick in _ticks(x_lo, x_hi):
        tx = px(tick)
        parts.append(
            f'<line x1="{tx:.2f}" y1="{top + plot_h}" x2="{tx:.2f}" '
            f'y2="{top + plot_h + 4}" stroke="#333333"/>'
        )
        parts.append(
            f'<text x="{tx:.2f}" y="{top + plot_h + 17}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{tick:.3g}</text>'
        )
    for tick in _ticks(y_lo, y_hi):
        ty = py(tick)
        parts.append(
            f'<line x1="{left - 4}" y1="{ty:.2f}" x2="{left}" y2="{ty:.2f}" '
            'stroke="#333333"/>'
        )
        parts.append(
            f'<text x="{left - 7}" y="{ty + 3:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{tick:.3g}</text>'
        )
    parts.append(
        f'<text x="{left + plot_w / 2:.2f}" y="{height - 10}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>'
    )
    parts.append(
        f'<text x="16" y="{top + plot_h / 2:.2f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {top + plot_h / 2:.2f})">{ylabel}</text>'
    )
    for xi, yi, ci in zip(x, y, color_index):
        colour = PALETTE[int(ci) % len(PALETTE)]
        parts.append(
            f'<circle cx="{px(xi):.2f}" cy="{py(yi):.2f}" r="2.5" '
            f'fill="{colour}" fill-opacity="0.7"/>'
        )
    for i, name in enumerate(legend_labels):
        ly = top + 12 + 16 * i
        colour = PALETTE[i % len(PALETTE)]
        parts.append(
            f'<circle cx="{left + plot_w - 78}" cy="{ly}" r="4" fill="{colour}"/>'
        )
        parts.append(
            f'<text x="{left + plot_w - 68}" y="{ly + 4}" '
            f'font-family="sans-serif" font-size="11">arm {name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
