"""Audio-visual alignment data: the calibration set mapping image locations to
reference binaural features, and person tracks ingested from the tracker."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spectral import AudioClip, NoiseStats, binaural_feature_static, stft


@dataclass(frozen=True)
class TrainingSet:
    """Calibration pairs: reference feature vectors and their pixel locations."""

    features: np.ndarray   # (F, M) complex
    locations: np.ndarray  # (2, M) pixels
    grid_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.complex128)
        locs = np.asarray(self.locations, dtype=np.float64)
        if feats.ndim != 2 or locs.ndim != 2 or locs.shape[0] != 2:
            raise ValueError("features must be F x M, locations 2 x M")
        if feats.shape[1] != locs.shape[1]:
            raise ValueError(
                f"feature/location count mismatch: {feats.shape[1]} vs {locs.shape[1]}"
            )
        if not np.all(np.isfinite(locs)):
            raise ValueError("locations must be finite")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "locations", locs)

    @property
    def n_points(self) -> int:
        return self.features.shape[1]

    @property
    def n_freqs(self) -> int:
        return self.features.shape[0]

    def save(self, path: str | Path) -> None:
        """Persist as a single JSON bundle."""
        payload = {
            "n_freqs": self.n_freqs,
            "n_points": self.n_points,
            "grid_meta": self.grid_meta,
            "points": [
                {
                    "x": float(self.locations[0, m]),
                    "y": float(self.locations[1, m]),
                    "feature_re": self.features[:, m].real.tolist(),
                    "feature_im": self.features[:, m].imag.tolist(),
                }
                for m in range(self.n_points)
            ],
        }
        Path(path).write_text(json.dumps(payload))

    @classmethod
    def load(cls, path: str | Path) -> "TrainingSet":
        payload = json.loads(Path(path).read_text())
        pts = payload["points"]
        feats = np.array(
            [np.array(p["feature_re"]) + 1j * np.array(p["feature_im"]) for p in pts]
        ).T
        locs = np.array([[p["x"] for p in pts], [p["y"] for p in pts]], dtype=np.float64)
        return cls(features=feats, locations=locs, grid_meta=payload.get("grid_meta", {}))


@dataclass(frozen=True)
class PersonTrack:
    """Tracker output: per-frame pixel positions and visibility flags for a
    fixed roster of N persons."""

    positions: np.ndarray   # (T, N, 2)
    visibility: np.ndarray  # (T, N) in {0, 1}

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        vis = np.asarray(self.visibility, dtype=np.uint8)
        if pos.ndim != 3 or pos.shape[2] != 2:
            raise ValueError("positions must be T x N x 2")
        if vis.shape != pos.shape[:2]:
            raise ValueError("visibility must be T x N")
        if np.any((vis != 0) & (vis != 1)):
            raise ValueError("visibility entries must be 0 or 1")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "visibility", vis)

    @property
    def n_frames(self) -> int:
        return self.positions.shape[0]

    @property
    def n_persons(self) -> int:
        return self.positions.shape[1]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "n", "x", "y", "visible"])
            for t in range(self.n_frames):
                for n in range(self.n_persons):
                    writer.writerow(
                        [
                            t,
                            n,
                            f"{self.positions[t, n, 0]:.6g}",
                            f"{self.positions[t, n, 1]:.6g}",
                            int(self.visibility[t, n]),
                        ]
                    )

    @classmethod
    def from_csv(cls, path: str | Path) -> "PersonTrack":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                rows.append(
                    (int(row["t"]), int(row["n"]), float(row["x"]), float(row["y"]),
                     int(row["visible"]))
                )
        if not rows:
            raise ValueError(f"{path}: empty track file")
        T = max(r[0] for r in rows) + 1
        N = max(r[1] for r in rows) + 1
        pos = np.zeros((T, N, 2))
        vis = np.zeros((T, N), dtype=np.uint8)
        for t, n, x, y, v in rows:
            pos[t, n] = (x, y)
            vis[t, n] = v
        return cls(positions=pos, visibility=vis)


def build_training_set(
    grid_recordings: list[tuple[AudioClip, tuple[float, float]]],
    grid_meta: dict | None = None,
    noise_stats: NoiseStats | None = None,
    image_size: tuple[float, float] | None = None,
    window_len: int = 512,
    hop: int = 256,
) -> TrainingSet:
    """Build the calibration set from per-location recordings.

    Each recording must be at least one second long and excite every
    frequency: a point whose right-channel auto-spectrum is numerically zero
    at some bin (or falls below ``noise_stats.threshold_a``, when given) is
    rejected with the failing bins named.
    """
    if not grid_recordings:
        raise ValueError("need at least one grid recording")
    features = []
    locations = []
    for idx, (clip, loc) in enumerate(grid_recordings):
        if len(clip) < clip.sample_rate:
            raise ValueError(f"grid point {idx}: clip shorter than 1 s")
        x, y = float(loc[0]), float(loc[1])
        if image_size is not None:
            if not (0 <= x <= image_size[0] and 0 <= y <= image_size[1]):
                raise ValueError(f"grid point {idx}: location ({x}, {y}) outside image")
        left, right = stft(clip, window_len, hop)
        values, valid = binaural_feature_static(left, right)
        bad = ~valid
        if noise_stats is not None:
            auto = np.mean(np.abs(right.coefficients) ** 2, axis=1)
            bad |= auto < noise_stats.threshold_a
        if np.any(bad):
            bins = np.nonzero(bad)[0]
            shown = ", ".join(map(str, bins[:8])) + ("..." if len(bins) > 8 else "")
            raise ValueError(
                f"grid point {idx} at ({x}, {y}): power not significant at "
                f"{len(bins)} bins ({shown})"
            )
        features.append(values)
        locations.append((x, y))
    return TrainingSet(
        features=np.array(features).T,
        locations=np.array(locations).T,
        grid_meta=grid_meta or {},
    )


def nearest_training(ts: TrainingSet, x: tuple[float, float] | np.ndarray) -> int:
    """Index of the calibration point closest to pixel location x.

    Exact linear scan over all points; ties break to the lowest index.
    """
    query = np.asarray(x, dtype=np.float64).reshape(2, 1)
    d2 = np.sum((ts.locations - query) ** 2, axis=0)
    return int(np.argmin(d2))
