"""COCO annotation files -> detections JSONL.

Each image becomes one scene; each annotation becomes one object with a
point-mass class distribution on its category name. Boxes are converted
from COCO's pixel-space corner format to normalized center format and
clamped to the image bounds (with a warning) when they stick out.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

from .schema import corner_to_center, detection_object, scene_record


class CocoError(Exception):
    pass


@dataclass(frozen=True)
class CocoAnnotationSet:
    images: list[dict]
    annotations: list[dict]
    categories: dict[int, str]  # category id -> name

    @staticmethod
    def load(path: str) -> "CocoAnnotationSet":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise CocoError(f"{path}: invalid JSON ({exc})") from exc
        for key in ("images", "annotations", "categories"):
            if key not in raw or not isinstance(raw[key], list):
                raise CocoError(f"{path}: missing '{key}' array")
        categories = {}
        for cat in raw["categories"]:
            categories[int(cat["id"])] = str(cat["name"])
        return CocoAnnotationSet(raw["images"], raw["annotations"], categories)


def _image_id(image: dict) -> str:
    name = image.get("file_name")
    return str(name) if name else f"image{image['id']}"


def _clamped_bbox(ann: dict, width: float, height: float) -> tuple[float, float, float, float]:
    x, y, w, h = (float(v) for v in ann["bbox"])
    x2, y2 = x + w, y + h
    cx = min(max(x, 0.0), width)
    cy = min(max(y, 0.0), height)
    cx2 = min(max(x2, 0.0), width)
    cy2 = min(max(y2, 0.0), height)
    if (cx, cy, cx2, cy2) != (x, y, x2, y2):
        warnings.warn(
            f"annotation {ann.get('id')}: bbox {ann['bbox']} outside "
            f"{width}x{height} image, clamped"
        )
    if cx2 <= cx or cy2 <= cy:
        raise CocoError(f"annotation {ann.get('id')}: empty bbox after clamping")
    return cx, cy, cx2 - cx, cy2 - cy


def convert_coco(
    annotations_path: str, category: str | None = None
) -> list[dict]:
    """Build detections records, one per image, in the file's image order.

    `category` keeps only images that carry at least one annotation of that
    category (the kept scenes still include all their annotations).
    """
    coco = CocoAnnotationSet.load(annotations_path)

    by_image: dict[int, list[dict]] = {}
    for ann in coco.annotations:
        by_image.setdefault(int(ann["image_id"]), []).append(ann)

    records = []
    for image in coco.images:
        width, height = image.get("width"), image.get("height")
        if not width or not height:
            raise CocoError(f"image {image.get('id')}: missing dimensions")
        annotations = by_image.get(int(image["id"]), [])
        names = []
        objects = []
        for ann in annotations:
            cat_id = int(ann["category_id"])
            if cat_id not in coco.categories:
                raise CocoError(
                    f"annotation {ann.get('id')}: unknown category id {cat_id}"
                )
            name = coco.categories[cat_id]
            names.append(name)
            bbox = corner_to_center(*_clamped_bbox(ann, width, height), width, height)
            objects.append(detection_object(bbox, {name: 1.0}))
        if category is not None and category not in names:
            continue
        records.append(scene_record(_image_id(image), objects))
    return records
