"""graspq-convert command line."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .convert import ConversionError, LeftHandSequence, RawRecording, convert_sequence


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graspq-convert",
        description="Convert a raw recording into a graspq sequence file",
    )
    parser.add_argument("--root", required=True, help="dataset root directory")
    parser.add_argument("--subject", required=True, help="subject id (directory name)")
    parser.add_argument("--sequence", required=True, help="sequence id (directory name)")
    parser.add_argument("--out", required=True, help="output sequence JSON path")
    parser.add_argument("--labels", default=None, help="CSV with columns frame,gt_contact")
    parser.add_argument(
        "--mesh-dir", required=True, help="directory holding <ycb_name>.obj meshes"
    )
    parser.add_argument(
        "--global-scale", type=float, default=1.0,
        help="hand-measured global scale (default 1.0)",
    )
    parser.add_argument(
        "--segment-scales", default=None,
        help="15 comma-separated hand-measured segment scales",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    segment_scales = None
    if args.segment_scales:
        try:
            segment_scales = [float(v) for v in args.segment_scales.split(",")]
        except ValueError:
            print("graspq-convert: bad --segment-scales", file=sys.stderr)
            return 2
    raw = RawRecording(Path(args.root), args.subject, args.sequence)
    try:
        out = convert_sequence(
            raw,
            args.out,
            args.mesh_dir,
            labels_path=args.labels,
            global_scale=args.global_scale,
            segment_scales=segment_scales,
            notice=lambda msg: print(msg, file=sys.stderr),
        )
    except LeftHandSequence:
        return 0  # skipped with a notice, nothing written
    except ConversionError as exc:
        print(f"graspq-convert: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
