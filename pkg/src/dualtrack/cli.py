"""Command-line surface: track, evaluate, synth, inspect."""

import argparse
import os
import sys

import numpy as np

from . import io as io_mod
from . import metrics, synth
from .core import TrackerConfig
from .imaging import read_ppm, write_ppm
from .pipeline import FrameData, run_sequence

PALETTE = [
    (230, 60, 60), (60, 180, 60), (70, 100, 230), (230, 190, 40),
    (200, 70, 200), (60, 200, 200), (240, 130, 40), (140, 220, 70),
    (150, 90, 220), (220, 110, 150), (110, 170, 110), (170, 170, 60),
]

# 3x5 bitmap digits for overlay ids
DIGITS = {
    "0": ["111", "101", "101", "101", "111"],
    "1": ["010", "110", "010", "010", "111"],
    "2": ["111", "001", "111", "100", "111"],
    "3": ["111", "001", "111", "001", "111"],
    "4": ["101", "101", "111", "001", "001"],
    "5": ["111", "100", "111", "001", "111"],
    "6": ["111", "100", "111", "101", "111"],
    "7": ["111", "001", "010", "010", "010"],
    "8": ["111", "101", "111", "101", "111"],
    "9": ["111", "101", "111", "001", "111"],
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dualtrack",
        description="Tracking by detection with competing appearance and "
                    "point-flow trackers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_track = sub.add_parser("track", help="run the tracker over a sequence")
    p_track.add_argument("--detections", required=True)
    p_track.add_argument("--frames", help="directory of PPM/PGM frames")
    p_track.add_argument("--tracks-file",
                         help="precomputed feature tracks instead of frames")
    p_track.add_argument("--config")
    p_track.add_argument("--homography",
                         help="3x3 image-to-ground homography, 9 numbers")
    p_track.add_argument("--out", required=True)

    p_eval = sub.add_parser("evaluate", help="score a hypothesis against ground truth")
    p_eval.add_argument("--gt", required=True)
    p_eval.add_argument("--hyp", required=True)
    p_eval.add_argument("--iou", type=float, default=0.5)

    p_synth = sub.add_parser("synth", help="generate a synthetic sequence")
    p_synth.add_argument("--spec", required=True)
    p_synth.add_argument("--out", required=True)

    p_inspect = sub.add_parser("inspect", help="write per-frame box overlays")
    p_inspect.add_argument("--tracks", required=True)
    p_inspect.add_argument("--frames", required=True)
    p_inspect.add_argument("--out", required=True)
    return parser


def _cmd_track(args) -> int:
    if not args.frames and not args.tracks_file:
        print("track needs --frames and/or --tracks-file", file=sys.stderr)
        return 2
    cfg = io_mod.parse_config(args.config) if args.config else TrackerConfig()
    detections = io_mod.parse_detections(args.detections)
    homography = (io_mod.parse_homography(args.homography)
                  if args.homography else None)
    feature_tracks = (io_mod.parse_feature_tracks(args.tracks_file)
                      if args.tracks_file else None)
    if args.frames:
        frames = io_mod.iter_frame_data(args.frames)
    else:
        indices = sorted(set(detections) | set(feature_tracks or {}))
        frames = (FrameData(index=i) for i in indices)
    result = run_sequence(frames, detections, cfg,
                          feature_tracks_by_frame=feature_tracks,
                          homography=homography)
    io_mod.write_tracks(result.tracks, args.out, tags=result.tags)
    n_links = sum(len(per) for per in result.tracks.values())
    print(f"wrote {len(result.tracks)} tracks / {n_links} boxes to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    gt = io_mod.parse_tracks(args.gt)
    hyp = io_mod.parse_tracks(args.hyp)
    report = metrics.evaluate(gt, hyp, iou_thr=args.iou)
    rows = [
        ("MOTA", f"{report.mota:.4f}"),
        ("MOTP", f"{report.motp:.4f}"),
        ("M_bar", f"{report.m_bar:.4f}"),
        ("FP", str(report.fp)),
        ("FN", str(report.fn)),
        ("IDSW", str(report.idsw)),
        ("MT", f"{report.mt:.1f}%"),
        ("PT", f"{report.pt:.1f}%"),
        ("ML", f"{report.ml:.1f}%"),
    ]
    width = max(len(name) for name, _ in rows)
    print(f"{'metric':<{width}}  value")
    for name, value in rows:
        print(f"{name:<{width}}  {value}")
    return 0


def _cmd_synth(args) -> int:
    spec = synth.parse_synth_spec(args.spec)
    generate_synthetic(spec, args.out)
    print(f"wrote {spec.n_frames} frames to {args.out}")
    return 0


def generate_synthetic(spec: synth.SynthSpec, out_dir):
    """Render a synthetic sequence to disk: frames/, detections.csv, gt.csv."""
    frames_dir = os.path.join(out_dir, "frames")
    os.makedirs(frames_dir, exist_ok=True)
    textures = synth._textures(spec)
    for f in range(1, spec.n_frames + 1):
        img = synth.render_frame(spec, f, textures)
        write_ppm(os.path.join(frames_dir, f"{f:06d}.ppm"), img)
    io_mod.write_detections(synth.detections(spec),
                            os.path.join(out_dir, "detections.csv"))
    io_mod.write_tracks(synth.ground_truth(spec),
                        os.path.join(out_dir, "gt.csv"))


def _draw_box(img, box, color):
    h, w = img.shape[:2]
    x0 = int(round(max(box.x, 0)))
    y0 = int(round(max(box.y, 0)))
    x1 = int(round(min(box.right, w - 1)))
    y1 = int(round(min(box.bottom, h - 1)))
    if x0 >= x1 or y0 >= y1:
        return
    img[y0, x0:x1 + 1] = color
    img[y1, x0:x1 + 1] = color
    img[y0:y1 + 1, x0] = color
    img[y0:y1 + 1, x1] = color


def _draw_id(img, text, x, y, color):
    h, w = img.shape[:2]
    for ch in text:
        glyph = DIGITS.get(ch)
        if glyph is None:
            continue
        for dy, row in enumerate(glyph):
            for dx, bit in enumerate(row):
                if bit == "1" and 0 <= y + dy < h and 0 <= x + dx < w:
                    img[y + dy, x + dx] = color
        x += 4


def _cmd_inspect(args) -> int:
    tracks = io_mod.parse_tracks(args.tracks)
    os.makedirs(args.out, exist_ok=True)
    by_frame = {}
    for tid, per in tracks.items():
        for frame, box in per.items():
            by_frame.setdefault(frame, []).append((tid, box))
    count = 0
    for index, path in io_mod.list_frames(args.frames):
        if not path.endswith(".ppm"):
            continue
        img = read_ppm(path)
        for tid, box in sorted(by_frame.get(index, [])):
            color = PALETTE[tid % len(PALETTE)]
            _draw_box(img, box, color)
            _draw_id(img, str(tid), int(round(box.x)),
                     max(int(round(box.y)) - 7, 0), color)
        write_ppm(os.path.join(args.out, f"{index:06d}.ppm"), img)
        count += 1
    print(f"wrote {count} overlay frames to {args.out}")
    return 0


def cli(argv) -> int:
    """Entry point; returns the process exit code (0 ok, 1 I/O, 2 usage)."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    handlers = {
        "track": _cmd_track,
        "evaluate": _cmd_evaluate,
        "synth": _cmd_synth,
        "inspect": _cmd_inspect,
    }
    try:
        return handlers[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
