import json
import os
import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[2]
PRIMARY_SRC = REPO_ROOT / "src"


def primary_cli_env() -> dict:
    """Environment that lets `python -m logicrank` resolve the primary package."""
    env = dict(os.environ)
    env["PYTHONPATH"] = str(PRIMARY_SRC) + os.pathsep + env.get("PYTHONPATH", "")
    return env


def primary_cli_cmd() -> list[str]:
    return [sys.executable, "-m", "logicrank"]


@pytest.fixture
def coco_file(tmp_path):
    """One 640x480 image with two dog annotations and a cat."""
    record = {
        "images": [
            {"id": 1, "file_name": "park.jpg", "width": 640, "height": 480},
        ],
        "annotations": [
            {"id": 10, "image_id": 1, "category_id": 18, "bbox": [100, 120, 80, 60]},
            {"id": 11, "image_id": 1, "category_id": 18, "bbox": [400, 200, 90, 70]},
            {"id": 12, "image_id": 1, "category_id": 17, "bbox": [250, 300, 60, 50]},
        ],
        "categories": [
            {"id": 17, "name": "cat"},
            {"id": 18, "name": "dog"},
        ],
    }
    path = tmp_path / "instances.json"
    path.write_text(json.dumps(record))
    return str(path)
