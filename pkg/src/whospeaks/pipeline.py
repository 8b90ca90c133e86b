"""End-to-end diarization: audio plus person tracks in, speaking timeline out."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alignment import PersonTrack, TrainingSet
from .association import AssociationConfig, fit_freq_mixtures, speaking_probabilities
from .scoring import DiarTimeline
from .spectral import (
    AudioClip,
    BinauralSpectrogram,
    activity_mask,
    binaural_spectrogram,
    estimate_noise_stats,
    noise_stats_from_spectrograms,
    stft,
)
from .state_filter import FilterConfig, FilterTimeline, run_filter


@dataclass(frozen=True)
class PipelineConfig:
    window_len: int = 512
    hop: int = 256
    slice_frames: int = 25        # STFT frames per time slice (0.4 s at defaults)
    video_fps: float = 25.0
    beta: float = 3.0             # activity threshold over the noise floor
    noise_eps_min: float = 1e-12
    min_active_bins: int = 8      # below this a slice counts as uninformative
    association: AssociationConfig = field(default_factory=AssociationConfig)
    filtering: FilterConfig = field(default_factory=FilterConfig)


def slice_start_frames(
    n_total_frames: int, n_slices: int, cfg: PipelineConfig, sample_rate: int
) -> np.ndarray:
    """First STFT frame of each time slice, centered on the video frame."""
    k = min(cfg.slice_frames, n_total_frames)
    centers_s = (np.arange(n_slices) + 0.5) / cfg.video_fps
    # STFT frame j is centered at (j*hop + window/2) / fs
    center_frame = (centers_s * sample_rate - cfg.window_len / 2.0) / cfg.hop
    start = np.floor(center_frame - (k - 1) / 2.0 + 0.5).astype(int)
    return np.clip(start, 0, n_total_frames - k)


def diarize_pipeline(
    audio: AudioClip,
    tracks: PersonTrack,
    ts: TrainingSet,
    cfg: PipelineConfig = PipelineConfig(),
    noise_clips: list[AudioClip] | None = None,
    debug_dir: str | Path | None = None,
) -> tuple[DiarTimeline, FilterTimeline | None]:
    """Run the full chain: spectral front end, per-slice association, temporal
    filtering, MAP timeline.

    The noise floor is estimated from ``noise_clips`` when given, otherwise
    from the recording itself (per-frequency median over all frames, robust
    while speech is sparse per bin).
    """
    frame_period = 1.0 / cfg.video_fps
    if len(audio) < cfg.window_len:
        return DiarTimeline(frames=(), frame_period_s=frame_period), None
    left, right = stft(audio, cfg.window_len, cfg.hop)
    if noise_clips:
        stats = estimate_noise_stats(
            noise_clips, cfg.beta, cfg.noise_eps_min, cfg.window_len, cfg.hop
        )
    else:
        stats = noise_stats_from_spectrograms(left, right, cfg.beta, cfg.noise_eps_min)
    mask = activity_mask(left, right, stats)
    ratios = binaural_spectrogram(left, right, mask)

    n_total = left.n_frames
    n_audio_slices = int(np.floor(len(audio) / audio.sample_rate * cfg.video_fps))
    T = min(tracks.n_frames, n_audio_slices)
    k = min(cfg.slice_frames, n_total)
    starts = slice_start_frames(n_total, T, cfg, audio.sample_rate)

    debug_path = Path(debug_dir) if debug_dir is not None else None
    if debug_path is not None:
        debug_path.mkdir(parents=True, exist_ok=True)

    obs = []
    n_persons = tracks.n_persons
    for t in range(T):
        a = starts[t]
        view = BinauralSpectrogram(
            Y=ratios.Y[:, a:a + k], mask=ratios.mask[:, a:a + k], time_index=t
        )
        vis = tracks.visibility[t]
        p_speak = np.full(n_persons, 0.5)
        fit = None
        if vis.any() and int(view.mask.sum()) >= cfg.min_active_bins:
            fit = fit_freq_mixtures(
                view, ts, tracks.positions[t], vis, cfg.association
            )
            if fit.informative:
                ids = np.nonzero(vis)[0]
                p_speak[ids] = speaking_probabilities(fit.responsibilities, view.mask)
        obs.append((p_speak, vis))
        if debug_path is not None:
            _dump_slice_debug(debug_path, t, fit, p_speak)

    if not obs:
        return DiarTimeline(frames=(), frame_period_s=frame_period), None
    result = run_filter(obs, cfg.filtering)
    timeline = DiarTimeline.from_bitmasks(result.map_bitmasks, frame_period)
    return timeline, result


def _dump_slice_debug(debug_path: Path, t: int, fit, p_speak: np.ndarray) -> None:
    payload = {"t": t, "p_speak": [float(x) for x in p_speak]}
    if fit is not None and fit.informative:
        payload["converged"] = bool(fit.converged)
        payload["n_iters"] = int(fit.n_iters)
        payload["per_freq"] = [
            {
                "priors": [float(x) for x in p.priors],
                "variances": [float(x) for x in p.variances],
            }
            for p in fit.params
        ]
    (debug_path / f"slice_{t:06d}.json").write_text(json.dumps(payload))
