"""Command-line interface.

Subcommands: simulate, train, diarize, score, report. Defaults follow the
recording setup this pipeline targets: 16 kHz audio, 32 ms Hann windows with
16 ms hops, 25-frame time slices at 25 video FPS, q = 0.8, beta = 3.0.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .alignment import PersonTrack, TrainingSet, build_training_set
from .association import AssociationConfig
from .pipeline import PipelineConfig, diarize_pipeline
from .reporting import report_timeline, write_timeline_csv, write_timeline_svg
from .scoring import read_timeline_csv, score_der, write_labels_csv
from .simulate import load_scene, render_scene
from .spectral import load_wav, save_wav
from .state_filter import FilterConfig


def _cmd_simulate(args) -> int:
    scene = load_scene(args.scene)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    clip, truth = render_scene(scene)
    save_wav(out / "audio.wav", clip)
    truth.tracks.to_csv(out / "tracks.csv")
    write_labels_csv(truth.speech_labels, truth.frame_period_s, out / "labels.csv")
    meta = {
        "duration_s": scene.duration_s,
        "seed": scene.seed,
        "noise_std": scene.noise_std,
        "n_persons": len(scene.persons),
        "video_fps": scene.rig.video_fps,
    }
    (out / "scene_meta.json").write_text(json.dumps(meta))
    print(f"wrote audio.wav, tracks.csv, labels.csv to {out}")
    return 0


def _cmd_train(args) -> int:
    grid_dir = Path(args.grid)
    manifest = json.loads((grid_dir / "manifest.json").read_text())
    recordings = []
    for entry in manifest["points"]:
        clip = load_wav(grid_dir / entry["wav"])
        recordings.append((clip, (entry["x"], entry["y"])))
    ts = build_training_set(recordings, grid_meta=manifest.get("grid_meta", {}))
    ts.save(args.out)
    print(f"trained on {ts.n_points} points, {ts.n_freqs} bins -> {args.out}")
    return 0


def _cmd_diarize(args) -> int:
    audio = load_wav(args.audio)
    tracks = PersonTrack.from_csv(args.tracks)
    ts = TrainingSet.load(args.train)
    cfg = PipelineConfig(
        beta=args.beta,
        association=AssociationConfig(),
        filtering=FilterConfig(q=args.q),
    )
    noise_clips = [load_wav(args.noise)] if args.noise else None
    timeline, result = diarize_pipeline(
        audio, tracks, ts, cfg, noise_clips=noise_clips, debug_dir=args.debug_dir
    )
    marginals = result.marginals if result is not None else None
    write_timeline_csv(timeline, marginals, args.out)
    print(f"diarized {timeline.n_frames} frames -> {args.out}")
    return 0


def _cmd_score(args) -> int:
    reference = read_timeline_csv(args.ref)
    hypothesis = read_timeline_csv(args.hyp)
    report = score_der(reference, hypothesis, collar_s=args.collar, mapping=args.mapping)
    print(
        f"DER {report.der:.4f}  (false alarm {report.false_alarm_s:.2f} s, "
        f"miss {report.miss_s:.2f} s, speaker error {report.speaker_error_s:.2f} s, "
        f"scored speech {report.scored_speech_s:.2f} s)"
    )
    return 0


def _cmd_report(args) -> int:
    timeline = read_timeline_csv(args.input)
    if args.svg:
        write_timeline_svg(timeline, args.svg)
        print(f"wrote {args.svg}")
    if args.json_out:
        report_timeline(timeline, None, args.json_out, format="json")
        print(f"wrote {args.json_out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="whospeaks", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a synthetic scene to WAV + CSV")
    p.add_argument("scene", help="scene description (.json or .toml)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="build a calibration set from grid recordings")
    p.add_argument("--grid", required=True, help="directory with manifest.json + WAVs")
    p.add_argument("--out", required=True, help="output calibration bundle (.json)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("diarize", help="run the full pipeline on a recording")
    p.add_argument("--audio", required=True)
    p.add_argument("--tracks", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--q", type=float, default=0.8, help="self-transition prior")
    p.add_argument("--beta", type=float, default=3.0, help="activity threshold factor")
    p.add_argument("--noise", default=None, help="optional noise calibration WAV")
    p.add_argument("--debug-dir", default=None, help="per-slice JSON dumps")
    p.set_defaults(func=_cmd_diarize)

    p = sub.add_parser("score", help="score a timeline against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--collar", type=float, default=0.040)
    p.add_argument("--mapping", choices=["identity", "optimal"], default="identity")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("report", help="re-render a timeline as SVG or JSON")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--svg", default=None)
    p.add_argument("--json", dest="json_out", default=None)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface a single diagnostic line, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
