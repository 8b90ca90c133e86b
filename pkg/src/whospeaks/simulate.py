"""Synthetic binaural scene generation with exact ground truth.

Sources are filtered through an analytic interaural response (level difference,
fractional delay, and an elevation-dependent spectral tilt so that distinct
image positions yield distinct ratio vectors). Rendering is exact LTI
filtering on the dense FFT grid of the clip; a tone-bank renderer provides
machine-precision reference scenes for identity checks.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alignment import PersonTrack, TrainingSet
from .spectral import AudioClip, hann_periodic, stft


@dataclass(frozen=True)
class RigParams:
    """Camera/microphone rig model shared by all renderers."""

    image_width: float = 1920.0
    image_height: float = 1200.0
    fov_h_deg: float = 90.0
    fov_v_deg: float = 70.0
    ear_distance_m: float = 0.17
    speed_of_sound: float = 343.0
    ild_db: float = 6.0
    elevation_tilt_db: float = 3.0
    sample_rate: int = 16000
    window_len: int = 512
    hop: int = 256
    video_fps: float = 25.0

    @property
    def n_freqs(self) -> int:
        return self.window_len // 2

    @property
    def bin_freqs_hz(self) -> np.ndarray:
        return (np.arange(self.n_freqs) + 1) * self.sample_rate / self.window_len

    @property
    def samples_per_video_frame(self) -> int:
        return int(round(self.sample_rate / self.video_fps))


@dataclass(frozen=True)
class TransferFunctionPair:
    """Left/right acoustic responses sampled on a frequency grid."""

    h_left: np.ndarray
    h_right: np.ndarray
    freqs_hz: np.ndarray

    @property
    def ratio(self) -> np.ndarray:
        return self.h_left / self.h_right


def pixel_to_angles(position, rig: RigParams) -> tuple[float, float]:
    """Map a pixel position to (azimuth, elevation) in radians; image y grows
    downward, so the top of the image is positive elevation."""
    x, y = float(position[0]), float(position[1])
    if not (0.0 <= x <= rig.image_width and 0.0 <= y <= rig.image_height):
        raise ValueError(f"position ({x}, {y}) outside the image")
    theta = np.deg2rad(rig.fov_h_deg / 2.0) * (2.0 * x / rig.image_width - 1.0)
    phi = np.deg2rad(rig.fov_v_deg / 2.0) * (1.0 - 2.0 * y / rig.image_height)
    return theta, phi


def _response(theta: float, phi: float, freqs: np.ndarray, rig: RigParams):
    tau = rig.ear_distance_m / rig.speed_of_sound * np.sin(theta)
    tilt = rig.elevation_tilt_db * np.sin(phi) * freqs / (rig.sample_rate / 2.0)
    half_gain_db = (rig.ild_db * np.sin(theta) + tilt) / 2.0
    g = 10.0 ** (half_gain_db / 20.0)
    phase = np.exp(-1j * np.pi * freqs * tau)
    return g * phase, np.conj(phase) / g


def synth_rtf(position, rig: RigParams = RigParams(), freqs_hz: np.ndarray | None = None) -> TransferFunctionPair:
    """Analytic transfer-function pair for a source at a pixel position.

    The left/right ratio combines a level difference of ``ild_db * sin(az)``,
    a fractional interaural delay ``(d/c) * sin(az)``, and an elevation gain
    tilt proportional to frequency; the ratio is smooth in position and
    distinct for distinct grid positions.
    """
    theta, phi = pixel_to_angles(position, rig)
    freqs = rig.bin_freqs_hz if freqs_hz is None else np.asarray(freqs_hz, dtype=np.float64)
    h_left, h_right = _response(theta, phi, freqs, rig)
    return TransferFunctionPair(h_left=h_left, h_right=h_right, freqs_hz=freqs)


def _filter_static(dry: np.ndarray, position, rig: RigParams) -> tuple[np.ndarray, np.ndarray]:
    """Exact filtering of a whole clip through the response at one position."""
    n = len(dry)
    spec = np.fft.rfft(dry)
    freqs = np.fft.rfftfreq(n, 1.0 / rig.sample_rate)
    theta, phi = pixel_to_angles(position, rig)
    h_left, h_right = _response(theta, phi, freqs, rig)
    return np.fft.irfft(spec * h_left, n), np.fft.irfft(spec * h_right, n)


def _filter_moving(dry: np.ndarray, positions: np.ndarray, rig: RigParams) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-static rendering: the position is frozen within each video
    frame and segments are overlap-added with padding for the filter tail."""
    n = len(dry)
    spf = rig.samples_per_video_frame
    pad = 1024
    left = np.zeros(n + pad)
    right = np.zeros(n + pad)
    freqs = np.fft.rfftfreq(spf + pad, 1.0 / rig.sample_rate)
    for s in range(int(np.ceil(n / spf))):
        seg = dry[s * spf:(s + 1) * spf]
        if not np.any(seg):
            continue
        block = np.zeros(spf + pad)
        block[: len(seg)] = seg
        theta, phi = pixel_to_angles(positions[min(s, len(positions) - 1)], rig)
        h_left, h_right = _response(theta, phi, freqs, rig)
        spec = np.fft.rfft(block)
        left[s * spf: s * spf + spf + pad] += np.fft.irfft(spec * h_left, spf + pad)
        right[s * spf: s * spf + spf + pad] += np.fft.irfft(spec * h_right, spf + pad)
    return left[:n], right[:n]


@dataclass(frozen=True)
class PersonSpec:
    """One simulated person: a trajectory, speech intervals, and visibility."""

    waypoints: np.ndarray                 # (W, 3) rows of (time_s, x, y); one row = static
    speech_script: list[tuple[float, float]] = field(default_factory=list)
    visible_intervals: list[tuple[float, float]] | None = None  # None: always visible

    def __post_init__(self):
        wp = np.atleast_2d(np.asarray(self.waypoints, dtype=np.float64))
        if wp.shape[1] == 2:  # bare (x, y): static person
            wp = np.hstack([np.zeros((wp.shape[0], 1)), wp])
        if wp.shape[1] != 3:
            raise ValueError("waypoints must be rows of (time_s, x, y)")
        object.__setattr__(self, "waypoints", wp)

    def position_at(self, t_s: float) -> np.ndarray:
        wp = self.waypoints
        if len(wp) == 1:
            return wp[0, 1:]
        x = np.interp(t_s, wp[:, 0], wp[:, 1])
        y = np.interp(t_s, wp[:, 0], wp[:, 2])
        return np.array([x, y])

    def is_static(self) -> bool:
        return len(self.waypoints) == 1 or bool(
            np.all(self.waypoints[:, 1:] == self.waypoints[0, 1:])
        )

    def visible_at(self, t_s: float) -> bool:
        if self.visible_intervals is None:
            return True
        return any(a <= t_s < b for a, b in self.visible_intervals)

    def speaking_at(self, t_s: float) -> bool:
        return any(a <= t_s < b for a, b in self.speech_script)


@dataclass(frozen=True)
class Scene:
    """Full scenario description; rendering is deterministic given the seed."""

    persons: list[PersonSpec]
    duration_s: float
    seed: int = 0
    noise_std: float = 0.0   # time-domain sensor noise, per channel
    rig: RigParams = RigParams()

    def __post_init__(self):
        for i, p in enumerate(self.persons):
            for a, b in p.speech_script:
                if not (0.0 <= a <= b <= self.duration_s):
                    raise ValueError(f"person {i}: speech interval ({a}, {b}) outside scene")
            for _, x, y in p.waypoints:
                pixel_to_angles((x, y), self.rig)  # raises when out of bounds

    @property
    def noise_power(self) -> np.ndarray:
        """Expected per-bin STFT noise power (per channel) implied by noise_std."""
        win_energy = float(np.sum(hann_periodic(self.rig.window_len) ** 2))
        return np.full(self.rig.n_freqs, self.noise_std**2 * win_energy)

    @property
    def n_video_frames(self) -> int:
        return int(np.floor(self.duration_s * self.rig.video_fps))


@dataclass(frozen=True)
class GroundTruth:
    """Everything a test needs to score the pipeline on a rendered scene."""

    tracks: PersonTrack
    speech_labels: np.ndarray       # (T, N) uint8
    source_tf_energy: np.ndarray    # (N, F, K_total) max of channel powers, noiseless
    noise_floor: np.ndarray         # (F,) expected per-bin noise power
    video_fps: float

    @property
    def frame_period_s(self) -> float:
        return 1.0 / self.video_fps


def _syllabic_envelope(n: int, fs: int, rng: np.random.Generator,
                       rate_lo: float, rate_hi: float, duty: float) -> np.ndarray:
    """On/off syllable gating with raised-cosine ramps."""
    env = np.zeros(n)
    ramp = int(0.010 * fs)
    cursor = 0
    while cursor < n:
        period = int(fs / rng.uniform(rate_lo, rate_hi))
        voiced = int(duty * period)
        a, b = cursor, min(cursor + voiced, n)
        env[a:b] = 1.0
        if b - a > 2 * ramp:
            r = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
            env[a:a + ramp] = np.minimum(env[a:a + ramp], r)
            env[b - ramp:b] = np.minimum(env[b - ramp:b], r[::-1])
        cursor += period
    return env


def harmonic_burst_source(duration_s: float, fs: int, rng: np.random.Generator,
                          f0_lo: float = 120.0, f0_hi: float = 250.0,
                          syllable_lo: float = 3.0, syllable_hi: float = 8.0,
                          duty: float = 0.75, harmonic_keep: float = 0.4) -> np.ndarray:
    """Speech-like dry source: harmonic bursts with a random fundamental and a
    syllabic on/off envelope.

    Only a random subset of the upper harmonics is kept per burst and
    amplitudes fall off as 1/h, keeping each source sparse in frequency so
    that two simultaneous sources rarely collide in the same bin.
    """
    n = int(duration_s * fs)
    t = np.arange(n) / fs
    out = np.zeros(n)
    cursor = 0
    # new fundamental and harmonic subset every ~0.5 s keeps the spectrum moving
    while cursor < n:
        seg = min(int(0.5 * fs), n - cursor)
        f0 = rng.uniform(f0_lo, f0_hi)
        n_harm = int((fs / 2 - 200.0) / f0)
        keep = np.ones(n_harm, dtype=bool)
        keep[3:] = rng.uniform(size=max(n_harm - 3, 0)) < harmonic_keep
        amps = np.where(keep, (np.arange(1, n_harm + 1)) ** -1.0, 0.0)
        phases = rng.uniform(0, 2 * np.pi, n_harm)
        ts = t[cursor:cursor + seg]
        harm = np.nonzero(keep)[0]
        args = 2 * np.pi * f0 * (harm[:, None] + 1) * ts[None, :] + phases[harm, None]
        out[cursor:cursor + seg] = np.sum(amps[harm, None] * np.cos(args), axis=0)
        cursor += seg
    env = _syllabic_envelope(n, fs, rng, syllable_lo, syllable_hi, duty)
    out *= env
    rms = np.sqrt(np.mean(out[env > 0.5] ** 2)) if np.any(env > 0.5) else 1.0
    return out / max(rms, 1e-12)


def _script_gate(script: list[tuple[float, float]], n: int, fs: int) -> np.ndarray:
    gate = np.zeros(n)
    ramp = int(0.005 * fs)
    for a, b in script:
        i, j = int(a * fs), min(int(b * fs), n)
        gate[i:j] = 1.0
        if j - i > 2 * ramp:
            r = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
            gate[i:i + ramp] = np.minimum(gate[i:i + ramp], r)
            gate[j - ramp:j] = np.minimum(gate[j - ramp:j], r[::-1])
    return gate


def render_scene(scene: Scene) -> tuple[AudioClip, GroundTruth]:
    """Render a scene to a binaural clip plus exact ground truth.

    Rendering is linear in the sources, so per-source energies (used by mask
    and assignment oracles) are exact; sensor noise is added last.
    """
    rig = scene.rig
    fs = rig.sample_rate
    n = int(scene.duration_s * fs)
    rng = np.random.default_rng(scene.seed)
    T = scene.n_video_frames
    N = len(scene.persons)

    left = np.zeros(n)
    right = np.zeros(n)
    per_source_energy = []
    frame_times = (np.arange(T) + 0.5) / rig.video_fps
    for person in scene.persons:
        dry = harmonic_burst_source(scene.duration_s, fs, rng)
        dry *= _script_gate(person.speech_script, n, fs)
        if person.is_static():
            pl, pr = _filter_static(dry, person.waypoints[0, 1:], rig)
        else:
            seg_times = (np.arange(int(np.ceil(n / rig.samples_per_video_frame))) + 0.5) \
                / rig.video_fps
            positions = np.array([person.position_at(ts) for ts in seg_times])
            pl, pr = _filter_moving(dry, positions, rig)
        left += pl
        right += pr
        if n >= rig.window_len:
            sl, sr = stft(AudioClip(pl, pr, fs), rig.window_len, rig.hop)
            per_source_energy.append(
                np.maximum(np.abs(sl.coefficients) ** 2, np.abs(sr.coefficients) ** 2)
            )
    if scene.noise_std > 0:
        left = left + scene.noise_std * rng.standard_normal(n)
        right = right + scene.noise_std * rng.standard_normal(n)

    positions = np.zeros((T, N, 2))
    visibility = np.zeros((T, N), dtype=np.uint8)
    labels = np.zeros((T, N), dtype=np.uint8)
    for t in range(T):
        for p, person in enumerate(scene.persons):
            positions[t, p] = person.position_at(frame_times[t])
            visibility[t, p] = 1 if person.visible_at(frame_times[t]) else 0
            labels[t, p] = 1 if person.speaking_at(frame_times[t]) else 0
    truth = GroundTruth(
        tracks=PersonTrack(positions=positions, visibility=visibility),
        speech_labels=labels,
        source_tf_energy=np.array(per_source_energy) if per_source_energy else np.zeros((N, rig.n_freqs, 0)),
        noise_floor=scene.noise_power,
        video_fps=rig.video_fps,
    )
    return AudioClip(left, right, fs), truth


def make_grid(rig: RigParams = RigParams(), rows: int = 20, cols: int = 40) -> np.ndarray:
    """Uniform pixel grid of calibration positions at cell centers, (M, 2)."""
    xs = (np.arange(cols) + 0.5) * rig.image_width / cols
    ys = (np.arange(rows) + 0.5) * rig.image_height / rows
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def render_training_grid(
    grid_positions: np.ndarray,
    duration_s: float = 1.0,
    seed: int = 0,
    snr_db: float = 30.0,
    rig: RigParams = RigParams(),
) -> tuple[list[tuple[AudioClip, tuple[float, float]]], TrainingSet]:
    """Render white-noise calibration clips for each grid position.

    Returns the recordings paired with their pixel locations, plus the
    analytic ground-truth feature set for comparison.
    """
    if duration_s < 1.0:
        raise ValueError("calibration clips must be at least 1 s")
    rng = np.random.default_rng(seed)
    fs = rig.sample_rate
    n = int(duration_s * fs)
    grid_positions = np.atleast_2d(np.asarray(grid_positions, dtype=np.float64))
    recordings = []
    oracle_features = []
    for pos in grid_positions:
        dry = rng.standard_normal(n)
        pl, pr = _filter_static(dry, pos, rig)
        sig_pow = 0.5 * (np.var(pl) + np.var(pr))
        noise_std = np.sqrt(sig_pow / 10.0 ** (snr_db / 10.0)) if np.isfinite(snr_db) else 0.0
        if noise_std > 0:
            pl = pl + noise_std * rng.standard_normal(n)
            pr = pr + noise_std * rng.standard_normal(n)
        recordings.append((AudioClip(pl, pr, fs), (float(pos[0]), float(pos[1]))))
        oracle_features.append(synth_rtf(pos, rig).ratio)
    oracle = TrainingSet(
        features=np.array(oracle_features).T,
        locations=grid_positions.T,
        grid_meta={"analytic": True},
    )
    return recordings, oracle


def render_tone_bank(
    position,
    duration_s: float = 1.0,
    rig: RigParams = RigParams(),
    bin_indices: np.ndarray | None = None,
    seed: int = 0,
) -> tuple[AudioClip, np.ndarray]:
    """Noiseless reference scene: bin-centered cosines rendered analytically.

    Components sit on STFT bin centers spaced three bins apart, so the
    periodic-Hann leakage kernel (exactly three bins wide) never mixes
    components and the measured ratio at each component bin equals the
    analytic ratio to machine precision. Returns the clip and the stored-bin
    indices that carry source energy.
    """
    if bin_indices is None:
        bin_indices = np.arange(2, rig.n_freqs - 4, 3)
    bin_indices = np.asarray(bin_indices, dtype=int)
    if len(bin_indices) > 1 and np.min(np.diff(np.sort(bin_indices))) < 3:
        raise ValueError("tone bins must be at least 3 apart")
    rng = np.random.default_rng(seed)
    fs = rig.sample_rate
    t = np.arange(int(duration_s * fs)) / fs
    freqs = rig.bin_freqs_hz[bin_indices]
    pair = synth_rtf(position, rig, freqs_hz=freqs)
    phases = rng.uniform(0, 2 * np.pi, len(freqs))
    args = 2 * np.pi * freqs[:, None] * t[None, :] + phases[:, None]
    left = np.sum(np.abs(pair.h_left)[:, None] * np.cos(args + np.angle(pair.h_left)[:, None]), axis=0)
    right = np.sum(np.abs(pair.h_right)[:, None] * np.cos(args + np.angle(pair.h_right)[:, None]), axis=0)
    return AudioClip(left, right, fs), bin_indices


def _load_scene_dict(path: Path) -> dict:
    if path.suffix.lower() == ".toml":
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        return tomllib.loads(path.read_text())
    return json.loads(path.read_text())


def load_scene(path: str | Path) -> Scene:
    """Read a scene description from a JSON or TOML file.

    Keys: duration_s, seed, noise_std, optional rig overrides under "rig",
    and a "persons" list where each entry has "position" [x, y] or
    "waypoints" [[t, x, y], ...], "speech" [[start, end], ...], and an
    optional "visible" interval list.
    """
    path = Path(path)
    raw = _load_scene_dict(path)
    rig = RigParams(**raw.get("rig", {}))
    persons = []
    for p in raw.get("persons", []):
        if "waypoints" in p:
            wp = np.asarray(p["waypoints"], dtype=np.float64)
        else:
            wp = np.asarray([p["position"]], dtype=np.float64)
        persons.append(
            PersonSpec(
                waypoints=wp,
                speech_script=[tuple(iv) for iv in p.get("speech", [])],
                visible_intervals=(
                    [tuple(iv) for iv in p["visible"]] if "visible" in p else None
                ),
            )
        )
    return Scene(
        persons=persons,
        duration_s=float(raw["duration_s"]),
        seed=int(raw.get("seed", 0)),
        noise_std=float(raw.get("noise_std", 0.0)),
        rig=rig,
    )
