import json

import pytest
from PIL import Image, ImageDraw

from logicrank_adapter.detect import DetectorError, run_detector
from logicrank_adapter.schema import write_jsonl


def render_fixture(path, rects=(("red", (16, 16, 40, 48)),), size=(64, 64)):
    """White canvas with solid colored rectangles (corner coords x0,y0,x1,y1)."""
    image = Image.new("RGB", size, (255, 255, 255))
    draw = ImageDraw.Draw(image)
    colors = {"red": (255, 0, 0), "blue": (0, 0, 255), "green": (0, 255, 0)}
    for name, box in rects:
        draw.rectangle(box, fill=colors[name])
    image.save(path)


class TestColorBlob:
    def test_empty_directory(self, tmp_path):
        images = tmp_path / "imgs"
        images.mkdir()
        assert run_detector(str(images)) == []

    def test_single_prominent_object(self, tmp_path):
        images = tmp_path / "imgs"
        images.mkdir()
        render_fixture(images / "one.png")
        records = run_detector(str(images), "color-blob", threshold=0.5)
        assert len(records) == 1
        scene = records[0]
        assert scene["image_id"] == "one.png"
        assert len(scene["objects"]) >= 1
        obj = scene["objects"][0]
        assert obj["class"] == pytest.approx({"red": 1.0})
        cx, cy, w, h = obj["bbox"]
        # rectangle spans x 16..40, y 16..48 on a 64x64 canvas
        assert cx == pytest.approx((16 + 41) / 2 / 64, abs=0.02)
        assert cy == pytest.approx((16 + 49) / 2 / 64, abs=0.02)

    def test_two_colors_two_objects(self, tmp_path):
        images = tmp_path / "imgs"
        images.mkdir()
        render_fixture(
            images / "two.png",
            rects=(("red", (4, 4, 20, 20)), ("blue", (40, 40, 60, 60))),
        )
        records = run_detector(str(images), threshold=0.5)
        labels = {list(o["class"])[0] for o in records[0]["objects"]}
        assert labels == {"red", "blue"}

    def test_schema_contract(self, tmp_path):
        images = tmp_path / "imgs"
        images.mkdir()
        render_fixture(images / "a.png")
        render_fixture(images / "b.png", rects=(("green", (10, 10, 30, 30)),))
        records = run_detector(str(images), threshold=0.0)
        for record in records:
            assert record["schema_version"] == 1
            assert isinstance(record["image_id"], str)
            for obj in record["objects"]:
                assert all(0.0 <= v <= 1.0 for v in obj["bbox"])
                assert all(0.0 <= p <= 1.0 for p in obj["class"].values())

    def test_threshold_filters(self, tmp_path):
        images = tmp_path / "imgs"
        images.mkdir()
        render_fixture(images / "one.png")
        records = run_detector(str(images), threshold=1.1)
        assert records[0]["objects"] == []

    def test_deterministic(self, tmp_path):
        images = tmp_path / "imgs"
        images.mkdir()
        render_fixture(images / "one.png", rects=(("red", (4, 4, 20, 20)), ("blue", (40, 8, 60, 30))))
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_jsonl(run_detector(str(images)), str(a))
        write_jsonl(run_detector(str(images)), str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_unreadable_image(self, tmp_path):
        images = tmp_path / "imgs"
        images.mkdir()
        (images / "junk.png").write_bytes(b"not an image")
        with pytest.raises(DetectorError, match="unreadable"):
            run_detector(str(images))

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DetectorError):
            run_detector(str(tmp_path / "nope"))


class TestHubBackend:
    def test_model_load_failure(self, tmp_path, monkeypatch):
        monkeypatch.setenv("HF_HUB_OFFLINE", "1")
        images = tmp_path / "imgs"
        images.mkdir()
        render_fixture(images / "one.png")
        with pytest.raises(DetectorError, match="model load failure"):
            run_detector(str(images), model_name="no/such-model-anywhere")
