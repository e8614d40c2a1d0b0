"""Object-detector inference -> detections JSONL.

Two backends select by model name:

* ``color-blob`` - a built-in, dependency-light detector that finds
  connected components of saturated palette colors. It exists so the
  pipeline can run deterministically on machines without model weights;
  its class names are color names.
* anything else - treated as a HuggingFace object-detection model name and
  loaded from the local cache (weights must already be present; there is
  no silent download fallback).

Both emit per-object class distributions from detector scores above the
threshold and are deterministic for fixed weights and inputs.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image

from .schema import corner_to_center, detection_object, scene_record

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".gif")

PALETTE = {
    "red": (255, 0, 0),
    "green": (0, 255, 0),
    "blue": (0, 0, 255),
    "yellow": (255, 255, 0),
    "cyan": (0, 255, 255),
    "magenta": (255, 0, 255),
    "white": (255, 255, 255),
    "black": (0, 0, 0),
    "gray": (128, 128, 128),
}

MIN_BLOB_AREA = 16


class DetectorError(Exception):
    pass


def list_images(images_dir: str) -> list[Path]:
    root = Path(images_dir)
    if not root.is_dir():
        raise DetectorError(f"{images_dir} is not a directory")
    return sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def run_detector(
    images_dir: str, model_name: str = "color-blob", threshold: float = 0.7
) -> list[dict]:
    """One detections record per image, in sorted filename order."""
    images = list_images(images_dir)
    if model_name == "color-blob":
        detect = _ColorBlobDetector()
    else:
        detect = _load_hub_detector(model_name)
    records = []
    for path in images:
        try:
            image = Image.open(path).convert("RGB")
        except Exception as exc:
            raise DetectorError(f"unreadable image {path}: {exc}") from exc
        objects = [
            detection_object(bbox, {label: score})
            for label, score, bbox in detect(image)
            if score >= threshold
        ]
        records.append(scene_record(path.name, objects))
    return records


# ---------------------------------------------------------------------------
# Built-in color-blob backend
# ---------------------------------------------------------------------------

class _ColorBlobDetector:
    def __call__(self, image: Image.Image) -> list[tuple[str, float, tuple]]:
        pixels = np.asarray(image, dtype=np.float64)
        height, width = pixels.shape[:2]
        names = list(PALETTE)
        anchors = np.array([PALETTE[n] for n in names], dtype=np.float64)
        # distance of every pixel to every palette color
        dists = np.linalg.norm(pixels[:, :, None, :] - anchors[None, None], axis=3)
        nearest = dists.argmin(axis=2)
        confidence = 1.0 - dists.min(axis=2) / (255.0 * math.sqrt(3.0))

        border = np.concatenate(
            [nearest[0, :], nearest[-1, :], nearest[:, 0], nearest[:, -1]]
        )
        background = int(np.bincount(border).argmax())

        found = []
        for color_index, name in enumerate(names):
            if color_index == background:
                continue
            mask = nearest == color_index
            for ys, xs in _components(mask):
                if len(ys) < MIN_BLOB_AREA:
                    continue
                score = float(confidence[ys, xs].mean())
                x0, x1 = xs.min(), xs.max() + 1
                y0, y1 = ys.min(), ys.max() + 1
                bbox = corner_to_center(x0, y0, x1 - x0, y1 - y0, width, height)
                found.append((name, score, bbox, (int(y0), int(x0))))
        found.sort(key=lambda item: (item[3], item[0]))
        return [(name, score, bbox) for name, score, bbox, _ in found]


def _components(mask: np.ndarray):
    """4-connected components of a boolean mask as (row, col) index arrays."""
    visited = np.zeros_like(mask, dtype=bool)
    height, width = mask.shape
    for sy, sx in zip(*np.nonzero(mask)):
        if visited[sy, sx]:
            continue
        stack = [(int(sy), int(sx))]
        visited[sy, sx] = True
        ys, xs = [], []
        while stack:
            y, x = stack.pop()
            ys.append(y)
            xs.append(x)
            for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                if 0 <= ny < height and 0 <= nx < width and mask[ny, nx] and not visited[ny, nx]:
                    visited[ny, nx] = True
                    stack.append((ny, nx))
        yield np.array(ys), np.array(xs)


# ---------------------------------------------------------------------------
# HuggingFace backend
# ---------------------------------------------------------------------------

def _load_hub_detector(model_name: str):
    try:
        from transformers import pipeline

        detector = pipeline("object-detection", model=model_name)
    except Exception as exc:
        raise DetectorError(f"model load failure for {model_name!r}: {exc}") from exc

    def detect(image: Image.Image) -> list[tuple[str, float, tuple]]:
        width, height = image.size
        results = detector(image)
        found = []
        for hit in results:
            box = hit["box"]
            x0, y0 = float(box["xmin"]), float(box["ymin"])
            w, h = float(box["xmax"]) - x0, float(box["ymax"]) - y0
            if w <= 0 or h <= 0:
                continue
            bbox = corner_to_center(x0, y0, w, h, width, height)
            found.append((str(hit["label"]), float(hit["score"]), bbox))
        found.sort(key=lambda item: (item[2], item[0]))
        return found

    return detect
