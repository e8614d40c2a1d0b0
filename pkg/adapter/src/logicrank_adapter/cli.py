"""Adapter CLI: COCO files and detector runs -> logicrank detections JSONL."""

from __future__ import annotations

import argparse
import sys

from .coco import CocoError, convert_coco
from .detect import DetectorError, run_detector
from .schema import write_jsonl


def _cmd_convert_coco(args) -> int:
    records = convert_coco(args.annotations, category=args.category)
    write_jsonl(records, args.out)
    print(f"wrote {len(records)} scenes to {args.out}", file=sys.stderr)
    return 0


def _cmd_detect(args) -> int:
    records = run_detector(args.images, args.model, args.threshold)
    write_jsonl(records, args.out)
    print(f"wrote {len(records)} scenes to {args.out}", file=sys.stderr)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adapter",
        description="Convert perception outputs into logicrank detections JSONL.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    coco = sub.add_parser("convert-coco", help="convert a COCO annotation file")
    coco.add_argument("--annotations", required=True, help="COCO JSON file")
    coco.add_argument("--out", required=True, help="detections JSONL path")
    coco.add_argument(
        "--category", default=None,
        help="keep only images with at least one annotation of this category",
    )
    coco.set_defaults(func=_cmd_convert_coco)

    detect = sub.add_parser("detect", help="run an object detector over a directory")
    detect.add_argument("--images", required=True, help="directory of images")
    detect.add_argument(
        "--model", default="color-blob",
        help="'color-blob' or a locally cached HuggingFace detection model",
    )
    detect.add_argument("--threshold", type=float, default=0.7)
    detect.add_argument("--out", required=True, help="detections JSONL path")
    detect.set_defaults(func=_cmd_detect)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CocoError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except DetectorError as exc:
        print(f"detector error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
