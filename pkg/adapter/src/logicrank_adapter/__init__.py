"""Perception adapters feeding the logicrank detections JSONL format."""

from .coco import CocoAnnotationSet, CocoError, convert_coco
from .detect import DetectorError, run_detector
from .schema import corner_to_center, write_jsonl

__version__ = "0.1.0"

__all__ = [
    "CocoAnnotationSet",
    "CocoError",
    "DetectorError",
    "convert_coco",
    "corner_to_center",
    "run_detector",
    "write_jsonl",
]
