"""Timeline emission: per-frame CSV/JSON records and an SVG lane diagram."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .scoring import DiarTimeline

_PALETTE = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"]


def _n_persons(timeline: DiarTimeline, marginals: np.ndarray | None) -> int:
    if marginals is not None and marginals.size:
        return marginals.shape[1]
    return max((max(f) + 1 for f in timeline.frames if f), default=0)


def write_timeline_csv(
    timeline: DiarTimeline, marginals: np.ndarray | None, path: str | Path
) -> None:
    """Per-frame records: t, MAP bitmask, then per-person marginals."""
    n = _n_persons(timeline, marginals)
    with open(path, "w", newline="") as fh:
        fh.write(f"# frame_period_s={timeline.frame_period_s:.6f}\n")
        cols = ["t", "map_bitmask"] + [f"p_speak_{i}" for i in range(n)]
        fh.write(",".join(cols) + "\n")
        for t, frame in enumerate(timeline.frames):
            mask = sum(1 << i for i in frame)
            row = [str(t), str(mask)]
            if marginals is not None:
                row += [f"{marginals[t, i]:.9g}" for i in range(n)]
            else:
                row += ["" for _ in range(n)]
            fh.write(",".join(row) + "\n")


def write_timeline_json(
    timeline: DiarTimeline, marginals: np.ndarray | None, path: str | Path
) -> None:
    records = []
    for t, frame in enumerate(timeline.frames):
        rec = {"t": t, "speakers": sorted(frame)}
        if marginals is not None:
            rec["marginals"] = [float(x) for x in marginals[t]]
        records.append(rec)
    payload = {"frame_period_s": timeline.frame_period_s, "frames": records}
    Path(path).write_text(json.dumps(payload))


def _lane_segments(timeline: DiarTimeline, person: int) -> list[tuple[int, int]]:
    """Contiguous speaking runs (start, end-exclusive) for one person."""
    segments = []
    start = None
    for t, frame in enumerate(timeline.frames):
        speaking = person in frame
        if speaking and start is None:
            start = t
        elif not speaking and start is not None:
            segments.append((start, t))
            start = None
    if start is not None:
        segments.append((start, timeline.n_frames))
    return segments


def write_timeline_svg(timeline: DiarTimeline, path: str | Path, n_persons: int | None = None) -> None:
    """Lane diagram: one row per person, a rectangle per speaking segment."""
    if timeline.n_frames == 0:
        raise ValueError("cannot render an empty timeline")
    n = n_persons if n_persons is not None else _n_persons(timeline, None)
    n = max(n, 1)
    lane_h, gap, label_w = 24, 8, 90
    width = 900
    px = (width - label_w) / timeline.n_frames
    height = n * (lane_h + gap) + gap
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for person in range(n):
        y = gap + person * (lane_h + gap)
        color = _PALETTE[person % len(_PALETTE)]
        parts.append(
            f'<text x="4" y="{y + lane_h * 0.7:.1f}" font-size="12" '
            f'font-family="sans-serif">person {person}</text>'
        )
        parts.append(
            f'<line x1="{label_w}" y1="{y + lane_h / 2}" x2="{width}" '
            f'y2="{y + lane_h / 2}" stroke="#ddd"/>'
        )
        for a, b in _lane_segments(timeline, person):
            x = label_w + a * px
            w = max((b - a) * px, 0.5)
            parts.append(
                f'<rect class="seg lane-{person}" x="{x:.2f}" y="{y}" '
                f'width="{w:.2f}" height="{lane_h}" fill="{color}"/>'
            )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def report_timeline(
    timeline: DiarTimeline,
    marginals: np.ndarray | None,
    out_path: str | Path,
    format: str = "csv",
) -> Path:
    """Write the timeline in the requested format and return the path."""
    out_path = Path(out_path)
    if format == "csv":
        write_timeline_csv(timeline, marginals, out_path)
    elif format == "json":
        write_timeline_json(timeline, marginals, out_path)
    elif format == "svg":
        write_timeline_svg(timeline, out_path)
    else:
        raise ValueError(f"unknown format {format!r}")
    return out_path
