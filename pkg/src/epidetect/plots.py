"""Dependency-free SVG emission for detector output: statistic trajectories
with a dashed threshold line, and cluster maps from region centroids. A CSV
of the underlying numbers is always written alongside."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data import AlarmRecord, StudyGeometry

_W, _H, _PAD = 640, 360, 45


def _svg_header(width: int = _W, height: int = _H) -> str:
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">\n'
            f'<rect width="{width}" height="{height}" fill="white"/>\n')


def _axes() -> str:
    return (f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" '
            f'y2="{_H - _PAD}" stroke="black"/>\n'
            f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" '
            f'stroke="black"/>\n')


def _scale(values: np.ndarray, lo: float, hi: float, out_lo: float,
           out_hi: float) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    return out_lo + (values - lo) / (hi - lo) * (out_hi - out_lo)


def trajectory_svg(records: Sequence[AlarmRecord]) -> str:
    """Statistic vs time polyline with the threshold as a dashed line."""
    parts = [_svg_header(), _axes()]
    if records:
        ts = np.array([r.time_index for r in records], dtype=float)
        stats = np.array([r.statistic_value for r in records], dtype=float)
        thresholds = np.array([r.threshold for r in records], dtype=float)
        finite = np.concatenate([stats[np.isfinite(stats)],
                                 thresholds[np.isfinite(thresholds)]])
        lo = float(finite.min()) if finite.size else 0.0
        hi = float(finite.max()) if finite.size else 1.0
        xs = _scale(ts, ts.min(), ts.max(), _PAD, _W - _PAD)
        ys = _scale(stats, lo, hi, _H - _PAD, _PAD)
        yt = _scale(thresholds, lo, hi, _H - _PAD, _PAD)
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
        tpts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, yt))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="steelblue" '
                     f'stroke-width="1.5"/>\n')
        parts.append(f'<polyline points="{tpts}" fill="none" stroke="firebrick" '
                     f'stroke-width="1.2" stroke-dasharray="6 4"/>\n')
        for x, y, rec in zip(xs, ys, records):
            if rec.alarm:
                parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3.5" '
                             f'fill="firebrick"/>\n')
    parts.append("</svg>\n")
    return "".join(parts)


def cluster_map_svg(geometry: StudyGeometry,
                    cluster_regions: Sequence[int]) -> str:
    """Region centroids as circles; the flagged cluster filled and outlined
    with its convex hull."""
    parts = [_svg_header(_W, _W)]
    cent = geometry.centroids
    xs = _scale(cent[:, 0], cent[:, 0].min(), cent[:, 0].max(), _PAD, _W - _PAD)
    # flip y so north is up
    ys = _scale(cent[:, 1], cent[:, 1].min(), cent[:, 1].max(), _W - _PAD, _PAD)
    cluster = set(int(r) for r in cluster_regions)
    if len(cluster) >= 3:
        hull = _convex_hull([(xs[i], ys[i]) for i in sorted(cluster)])
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in hull)
        parts.append(f'<polygon points="{pts}" fill="lightgray" '
                     f'stroke="gray"/>\n')
    for i in range(geometry.n_regions):
        color = "firebrick" if i in cluster else "steelblue"
        r = 4.0 if i in cluster else 2.0
        parts.append(f'<circle cx="{xs[i]:.2f}" cy="{ys[i]:.2f}" r="{r}" '
                     f'fill="{color}"/>\n')
    parts.append("</svg>\n")
    return "".join(parts)


def _convex_hull(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def records_csv(records: Sequence[AlarmRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_index", "statistic_value", "threshold", "alarm"])
        for rec in records:
            writer.writerow([rec.time_index, rec.statistic_value,
                             rec.threshold, int(rec.alarm)])


def emit_plots(records: Sequence[AlarmRecord], kind: str, out_prefix,
               geometry: Optional[StudyGeometry] = None,
               cluster_regions: Optional[Sequence[int]] = None) -> list[Path]:
    """Write the SVG plot(s) plus the statistics CSV; returns written paths."""
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    written = []
    csv_path = prefix.with_suffix(".csv")
    records_csv(records, csv_path)
    written.append(csv_path)
    if kind == "trajectory":
        path = prefix.with_suffix(".svg")
        path.write_text(trajectory_svg(records), encoding="utf-8")
        written.append(path)
    elif kind == "cluster-map":
        if geometry is None or cluster_regions is None:
            raise ValueError("cluster map needs geometry and cluster regions")
        path = prefix.with_suffix(".map.svg")
        path.write_text(cluster_map_svg(geometry, cluster_regions),
                        encoding="utf-8")
        written.append(path)
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    return written
