"""Two-channel spectral front end.

Turns binaural time-domain audio into STFT spectrograms, per-frequency noise
statistics, power-based activity masks, and the two binaural feature
representations (a static per-frequency ratio for calibration recordings, and
a per-bin masked ratio spectrogram for mixtures).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

TINY = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class AudioClip:
    """Two-channel audio at a common sample rate."""

    samples_left: np.ndarray
    samples_right: np.ndarray
    sample_rate: int

    def __post_init__(self):
        left = np.asarray(self.samples_left, dtype=np.float64)
        right = np.asarray(self.samples_right, dtype=np.float64)
        if left.ndim != 1 or right.ndim != 1:
            raise ValueError("channels must be 1-D sample sequences")
        if len(left) != len(right):
            raise ValueError(
                f"channel length mismatch: left {len(left)} vs right {len(right)}"
            )
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples_left", left)
        object.__setattr__(self, "samples_right", right)

    def __len__(self) -> int:
        return len(self.samples_left)

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class Spectrogram:
    """Complex STFT coefficients, frequencies along rows, frames along columns."""

    coefficients: np.ndarray  # (F, K) complex
    freq_bin_hz: float
    hop_s: float
    frame_len_s: float

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.complex128)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise ValueError("coefficients must be a non-empty F x K matrix")
        object.__setattr__(self, "coefficients", c)

    @property
    def n_freqs(self) -> int:
        return self.coefficients.shape[0]

    @property
    def n_frames(self) -> int:
        return self.coefficients.shape[1]

    @property
    def bin_freqs_hz(self) -> np.ndarray:
        """Center frequency of each stored bin (DC is not stored)."""
        return (np.arange(self.n_freqs) + 1) * self.freq_bin_hz


@dataclass(frozen=True)
class NoiseStats:
    """Per-frequency noise floor and the derived activity threshold."""

    per_freq_floor: np.ndarray
    threshold_factor: float

    def __post_init__(self):
        floor = np.asarray(self.per_freq_floor, dtype=np.float64)
        if np.any(floor < 0):
            raise ValueError("noise floor must be non-negative")
        if self.threshold_factor <= 0:
            raise ValueError("threshold_factor must be positive")
        object.__setattr__(self, "per_freq_floor", floor)

    @property
    def threshold_a(self) -> np.ndarray:
        return self.threshold_factor * self.per_freq_floor


@dataclass(frozen=True)
class BinauralSpectrogram:
    """Masked per-bin channel-ratio spectrogram for one time slice."""

    Y: np.ndarray       # (F, K) complex, zero wherever mask is zero
    mask: np.ndarray    # (F, K) uint8
    time_index: int = 0

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=np.complex128)
        mask = np.asarray(self.mask, dtype=np.uint8)
        if Y.shape != mask.shape:
            raise ValueError("Y and mask shapes differ")
        if np.any(Y[mask == 0] != 0):
            raise ValueError("masked-out bins must hold exact zeros")
        if not np.all(np.isfinite(Y[mask == 1])):
            raise ValueError("active bins must be finite")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "mask", mask)


def hann_periodic(n: int) -> np.ndarray:
    """Periodic Hann window of length n."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _frame(x: np.ndarray, window_len: int, hop: int) -> np.ndarray:
    n_frames = 1 + (len(x) - window_len) // hop
    idx = hop * np.arange(n_frames)[:, None] + np.arange(window_len)[None, :]
    return x[idx]


def stft(clip: AudioClip, window_len: int = 512, hop: int = 256) -> tuple[Spectrogram, Spectrogram]:
    """Short-time Fourier transform of both channels.

    Frames start at multiples of ``hop`` with no centering or padding; a
    periodic Hann analysis window is applied. The one-sided spectrum keeps
    bins 1..window_len/2 (the DC bin is dropped, the Nyquist bin kept), so a
    512-sample window at 16 kHz yields 256 bins covering 31.25 Hz - 8 kHz.

    Parameters
    ----------
    clip : AudioClip
        Input audio; must be at least one window long.
    window_len : int
        Analysis window length in samples (even).
    hop : int
        Frame advance in samples, at most ``window_len``.

    Returns
    -------
    (Spectrogram, Spectrogram)
        Left- and right-channel spectrograms of identical shape.
    """
    if window_len % 2 != 0:
        raise ValueError(f"window_len must be even, got {window_len}")
    if hop <= 0 or hop > window_len:
        raise ValueError(f"hop must be in 1..window_len, got {hop}")
    if len(clip) < window_len:
        raise ValueError(
            f"clip too short: {len(clip)} samples, need at least {window_len}"
        )
    win = hann_periodic(window_len)
    n_keep = window_len // 2
    specs = []
    for x in (clip.samples_left, clip.samples_right):
        frames = _frame(x, window_len, hop) * win
        coef = np.fft.rfft(frames, axis=1)[:, 1:n_keep + 1].T
        specs.append(
            Spectrogram(
                coefficients=coef,
                freq_bin_hz=clip.sample_rate / window_len,
                hop_s=hop / clip.sample_rate,
                frame_len_s=window_len / clip.sample_rate,
            )
        )
    return specs[0], specs[1]


def estimate_noise_stats(
    noise_clips: list[AudioClip],
    beta: float = 3.0,
    eps_min: float = 0.0,
    window_len: int = 512,
    hop: int = 256,
) -> NoiseStats:
    """Estimate the per-frequency noise floor from noise-only recordings.

    The floor at each frequency is the median over all noise frames of
    max(|L|^2, |R|^2); the activity threshold is ``beta`` times the floor.
    ``eps_min`` lower-bounds the floor so that silent calibration input does
    not produce an all-pass mask.
    """
    if not noise_clips:
        raise ValueError("need at least one noise clip")
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    powers = []
    for clip in noise_clips:
        left, right = stft(clip, window_len, hop)
        powers.append(
            np.maximum(np.abs(left.coefficients) ** 2, np.abs(right.coefficients) ** 2)
        )
    stacked = np.hstack(powers)
    floor = np.maximum(np.median(stacked, axis=1), eps_min)
    return NoiseStats(per_freq_floor=floor, threshold_factor=beta)


def noise_stats_from_spectrograms(
    left: Spectrogram, right: Spectrogram, beta: float = 3.0, eps_min: float = 0.0
) -> NoiseStats:
    """Same floor estimate, from already-computed spectrograms."""
    power = np.maximum(np.abs(left.coefficients) ** 2, np.abs(right.coefficients) ** 2)
    floor = np.maximum(np.median(power, axis=1), eps_min)
    return NoiseStats(per_freq_floor=floor, threshold_factor=beta)


def activity_mask(left: Spectrogram, right: Spectrogram, stats: NoiseStats) -> np.ndarray:
    """Binary speech-activity mask: a bin is active unless both channel powers
    fall below the per-frequency threshold."""
    L = left.coefficients
    R = right.coefficients
    if L.shape != R.shape:
        raise ValueError(f"spectrogram shape mismatch: {L.shape} vs {R.shape}")
    power = np.maximum(np.abs(L) ** 2, np.abs(R) ** 2)
    return (power >= stats.threshold_a[:, None]).astype(np.uint8)


def binaural_feature_static(
    left: Spectrogram, right: Spectrogram
) -> tuple[np.ndarray, np.ndarray]:
    """Per-frequency channel ratio for a source static over the whole segment.

    Estimated as the frame-averaged cross-spectrum over the right-channel
    auto-spectrum. Frequencies where the auto-spectrum is numerically zero
    carry no localization evidence and are flagged invalid rather than raising.

    Returns
    -------
    (values, valid)
        ``values`` is a complex vector of length F, zeros at invalid bins;
        ``valid`` is the boolean validity vector.
    """
    L = left.coefficients
    R = right.coefficients
    if L.shape != R.shape:
        raise ValueError(f"spectrogram shape mismatch: {L.shape} vs {R.shape}")
    cross = np.mean(L * np.conj(R), axis=1)
    auto = np.mean(np.abs(R) ** 2, axis=1)
    valid = auto > TINY
    values = np.zeros(L.shape[0], dtype=np.complex128)
    values[valid] = cross[valid] / auto[valid]
    return values, valid


def binaural_spectrogram(
    left: Spectrogram, right: Spectrogram, mask: np.ndarray, time_index: int = 0
) -> BinauralSpectrogram:
    """Per-bin channel-ratio spectrogram, zeroed outside the activity mask.

    Active bins whose right-channel power is numerically zero are demoted to
    inactive instead of producing infinities.
    """
    L = left.coefficients
    R = right.coefficients
    mask = np.asarray(mask, dtype=np.uint8)
    if L.shape != R.shape or L.shape != mask.shape:
        raise ValueError("spectrograms and mask must share one shape")
    auto = np.abs(R) ** 2
    usable = (mask == 1) & (auto > TINY)
    Y = np.zeros_like(L)
    Y[usable] = L[usable] * np.conj(R[usable]) / auto[usable]
    return BinauralSpectrogram(Y=Y, mask=usable.astype(np.uint8), time_index=time_index)


def load_wav(path: str | Path, target_rate: int = 16000) -> AudioClip:
    """Read a two-channel WAV file (16-bit PCM or 32-bit float).

    Recordings at an integer multiple of ``target_rate`` are decimated by
    plain subsampling; any other rate is rejected.
    """
    rate, data = wavfile.read(str(path))
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError(f"{path}: expected a two-channel recording")
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        data = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        data = data.astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported sample format {data.dtype}")
    if rate != target_rate:
        if rate % target_rate != 0:
            raise ValueError(
                f"{path}: rate {rate} is not an integer multiple of {target_rate}"
            )
        data = data[:: rate // target_rate]
    return AudioClip(data[:, 0], data[:, 1], target_rate)


def save_wav(path: str | Path, clip: AudioClip) -> None:
    """Write a clip as a 32-bit float stereo WAV."""
    data = np.stack([clip.samples_left, clip.samples_right], axis=1).astype(np.float32)
    wavfile.write(str(path), clip.sample_rate, data)


def write_spectrogram_csv(spec: Spectrogram, path: str | Path) -> None:
    """Debug dump: one row per frequency bin, complex entries as re+imi."""
    with open(path, "w") as fh:
        for row in spec.coefficients:
            fh.write(",".join(f"{c.real:.9g}{c.imag:+.9g}i" for c in row))
            fh.write("\n")


def write_mask_csv(mask: np.ndarray, path: str | Path) -> None:
    np.savetxt(path, np.asarray(mask, dtype=int), fmt="%d", delimiter=",")
