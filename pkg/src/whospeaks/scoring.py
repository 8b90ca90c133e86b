"""Frame-based diarization error rate with a forgiveness collar.

Scoring happens at the video frame rate. Frames overlapping a collar around
any reference speaker-change boundary are excluded; each scored frame is
counted with multi-speaker awareness (every simultaneous reference speaker
contributes to the scored-speech denominator).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class DiarTimeline:
    """Who speaks in each frame: a set of person ids per video frame."""

    frames: tuple[frozenset[int], ...]
    frame_period_s: float

    def __post_init__(self):
        if self.frame_period_s <= 0:
            raise ValueError("frame_period_s must be positive")
        object.__setattr__(
            self, "frames", tuple(frozenset(f) for f in self.frames)
        )

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @classmethod
    def from_label_matrix(cls, labels: np.ndarray, frame_period_s: float) -> "DiarTimeline":
        """Build from a (T, N) binary matrix of per-person speaking labels."""
        labels = np.asarray(labels)
        frames = [frozenset(np.nonzero(row)[0].tolist()) for row in labels]
        return cls(frames=tuple(frames), frame_period_s=frame_period_s)

    @classmethod
    def from_bitmasks(cls, bitmasks: np.ndarray, frame_period_s: float) -> "DiarTimeline":
        frames = []
        for m in bitmasks:
            m = int(m)
            frames.append(frozenset(i for i in range(m.bit_length()) if (m >> i) & 1))
        return cls(frames=tuple(frames), frame_period_s=frame_period_s)


@dataclass(frozen=True)
class DerReport:
    """DER components, all in seconds of (speaker-weighted) time."""

    false_alarm_s: float
    miss_s: float
    speaker_error_s: float
    scored_speech_s: float

    @property
    def errors_s(self) -> float:
        return self.false_alarm_s + self.miss_s + self.speaker_error_s

    @property
    def der(self) -> float:
        if self.scored_speech_s > 0:
            return self.errors_s / self.scored_speech_s
        return 0.0 if self.errors_s == 0 else float("inf")


def _scored_frames(reference: DiarTimeline, collar_s: float) -> np.ndarray:
    """Boolean vector: frame is scored unless it overlaps the open collar
    interval around a reference speaker-change boundary."""
    T = reference.n_frames
    p = reference.frame_period_s
    scored = np.ones(T, dtype=bool)
    if collar_s <= 0:
        return scored
    for t in range(1, T):
        if reference.frames[t] != reference.frames[t - 1]:
            b = t * p
            lo = int(np.floor((b - collar_s) / p))
            hi = int(np.ceil((b + collar_s) / p))
            scored[max(lo, 0):min(hi, T)] = False
    return scored


def _optimal_mapping(
    reference: DiarTimeline, hypothesis: DiarTimeline, scored: np.ndarray
) -> dict[int, int]:
    """One-to-one hypothesis-to-reference id mapping maximizing co-occurrence."""
    ref_ids = sorted({i for f in reference.frames for i in f})
    hyp_ids = sorted({i for f in hypothesis.frames for i in f})
    if not ref_ids or not hyp_ids:
        return {}
    overlap = np.zeros((len(hyp_ids), len(ref_ids)))
    for t in range(reference.n_frames):
        if not scored[t]:
            continue
        hyp = hypothesis.frames[t] if t < hypothesis.n_frames else frozenset()
        for i, h in enumerate(hyp_ids):
            if h not in hyp:
                continue
            for j, r in enumerate(ref_ids):
                if r in reference.frames[t]:
                    overlap[i, j] += 1
    rows, cols = linear_sum_assignment(-overlap)
    return {hyp_ids[i]: ref_ids[j] for i, j in zip(rows, cols) if overlap[i, j] > 0}


def score_der(
    reference: DiarTimeline,
    hypothesis: DiarTimeline,
    collar_s: float = 0.040,
    mapping: str = "identity",
) -> DerReport:
    """Score a hypothesis timeline against the reference.

    Per scored frame with R reference and H hypothesis speakers, C of which
    match under the id mapping: false alarm max(0, H - R), miss max(0, R - H),
    speaker error min(R, H) - C. Identity mapping is the default since the
    hypothesis ids come from the same tracker as the reference; "optimal"
    computes the best one-to-one relabeling instead. Frames beyond the end of
    the hypothesis count as silent.
    """
    if abs(reference.frame_period_s - hypothesis.frame_period_s) > 1e-12:
        raise ValueError(
            f"frame period mismatch: {reference.frame_period_s} vs "
            f"{hypothesis.frame_period_s}"
        )
    if collar_s < 0:
        raise ValueError("collar must be non-negative")
    if mapping not in ("identity", "optimal"):
        raise ValueError(f"unknown mapping {mapping!r}")
    scored = _scored_frames(reference, collar_s)
    relabel = (
        _optimal_mapping(reference, hypothesis, scored)
        if mapping == "optimal"
        else None
    )
    p = reference.frame_period_s
    fa = miss = spkerr = speech = 0
    for t in range(reference.n_frames):
        if not scored[t]:
            continue
        ref = reference.frames[t]
        hyp = hypothesis.frames[t] if t < hypothesis.n_frames else frozenset()
        if relabel is not None:
            hyp = frozenset(relabel.get(h, -1 - h) for h in hyp)
        n_ref, n_hyp = len(ref), len(hyp)
        n_correct = len(ref & hyp)
        fa += max(0, n_hyp - n_ref)
        miss += max(0, n_ref - n_hyp)
        spkerr += min(n_ref, n_hyp) - n_correct
        speech += n_ref
    return DerReport(
        false_alarm_s=fa * p,
        miss_s=miss * p,
        speaker_error_s=spkerr * p,
        scored_speech_s=speech * p,
    )


def false_alarm_fraction(hypothesis: DiarTimeline) -> float:
    """Fraction of frames with any hypothesized speaker (for noise-only scenes)."""
    if hypothesis.n_frames == 0:
        return 0.0
    return sum(1 for f in hypothesis.frames if f) / hypothesis.n_frames


# -- CSV interchange ---------------------------------------------------------

def _read_rows(path: str | Path) -> tuple[float, list[dict]]:
    period = None
    rows = []
    with open(path, newline="") as fh:
        header = None
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "frame_period_s=" in line:
                    period = float(line.split("frame_period_s=")[1])
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            rows.append(dict(zip(header, line.split(","))))
    if period is None:
        period = 0.040
    return period, rows


def read_timeline_csv(path: str | Path) -> DiarTimeline:
    """Read either timeline schema: (t, map_bitmask, ...) as written by the
    pipeline, or long-form ground-truth labels (t, n, speaking)."""
    period, rows = _read_rows(path)
    if not rows:
        return DiarTimeline(frames=(), frame_period_s=period)
    if "map_bitmask" in rows[0]:
        T = max(int(r["t"]) for r in rows) + 1
        masks = np.zeros(T, dtype=np.int64)
        for r in rows:
            masks[int(r["t"])] = int(r["map_bitmask"])
        return DiarTimeline.from_bitmasks(masks, period)
    if "speaking" in rows[0]:
        T = max(int(r["t"]) for r in rows) + 1
        N = max(int(r["n"]) for r in rows) + 1
        labels = np.zeros((T, N), dtype=np.uint8)
        for r in rows:
            labels[int(r["t"]), int(r["n"])] = int(r["speaking"])
        return DiarTimeline.from_label_matrix(labels, period)
    raise ValueError(f"{path}: unrecognized timeline schema {list(rows[0])}")


def write_labels_csv(labels: np.ndarray, frame_period_s: float, path: str | Path) -> None:
    """Ground-truth labels in long form: one row per (t, n)."""
    labels = np.asarray(labels, dtype=int)
    with open(path, "w", newline="") as fh:
        fh.write(f"# frame_period_s={frame_period_s:.6f}\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "n", "speaking"])
        for t in range(labels.shape[0]):
            for n in range(labels.shape[1]):
                writer.writerow([t, n, labels[t, n]])
