"""Detections JSONL records as consumed by the logicrank engine.

The adapter talks to the engine only through this file format, so the
writer lives here rather than importing the engine package.
"""

from __future__ import annotations

import json

SCHEMA_VERSION = 1


def scene_record(image_id: str, objects: list[dict]) -> dict:
    return {"schema_version": SCHEMA_VERSION, "image_id": image_id, "objects": objects}


def detection_object(
    bbox: tuple[float, float, float, float], class_dist: dict[str, float]
) -> dict:
    return {"bbox": [float(v) for v in bbox], "class": class_dist}


def corner_to_center(
    x: float, y: float, w: float, h: float, image_w: float, image_h: float
) -> tuple[float, float, float, float]:
    """Pixel-space corner box -> normalized center box."""
    return ((x + w / 2) / image_w, (y + h / 2) / image_h, w / image_w, h / image_h)


def write_jsonl(records: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
