"""Synthetic scene pools with ground truth, standing in for generated images.

Objects sit on a 4x4 grid of cell centers (step 0.25). The step is chosen
so that any two objects in different rows/columns are separated enough for
the spatial logistic at the default slope to clear 0.99, which keeps the
fuzzy scores and the crisp oracle in agreement on noise-free scenes;
same-row/column pairs tie at exactly 0.5 and are crisp-false either way.

Noise model (sigma): attribute distributions become
``softmax((one_hot + N(0, sigma)) / T)`` with fixed temperature T = 0.15,
and detection centers get N(0, sigma / 4) jitter clamped to [0, 1].
sigma = 0 emits exact one-hot distributions and true centers. Structure
(counts, cells, labels) and noise draw from two independent seeded
streams, so pools with the same seed share ground truth across noise
levels.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .oracle import CrispScene, crisp_eval
from .reasoner import ClauseWeights, evaluate_scene
from .rules import RuleProgram, parse_program
from .scene import (
    DetectedObject,
    E_MAX_DEFAULT,
    SceneRecord,
    ScenePool,
    ValuationConfig,
)

GRID = (0.125, 0.375, 0.625, 0.875)
TEMPERATURE = 0.15

FAMILIES = ("shape", "color", "size", "class")


@dataclass(frozen=True)
class SceneSpec:
    object_count_range: tuple[int, int] = (2, 6)
    shape_vocab: tuple[str, ...] = ("sphere", "cube", "cylinder")
    color_vocab: tuple[str, ...] = ("red", "blue", "green", "yellow", "gray", "purple")
    size_vocab: tuple[str, ...] = ("small", "large")
    class_vocab: tuple[str, ...] = ("dog", "cat", "car", "person")
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.object_count_range
        if lo < 0 or hi < lo or hi > E_MAX_DEFAULT:
            raise ValueError(f"bad object count range {self.object_count_range}")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")

    def vocab(self, family: str) -> tuple[str, ...]:
        return getattr(self, f"{family}_vocab")


@dataclass(frozen=True)
class TruthObject:
    id: str
    bbox: tuple[float, float, float, float]
    labels: dict[str, str]  # family -> label


@dataclass(frozen=True)
class GroundTruthScene:
    image_id: str
    objects: tuple[TruthObject, ...]

    def __post_init__(self):
        for a in self.objects:
            for b in self.objects:
                if a.id >= b.id:
                    continue
                sep_x = abs(a.bbox[0] - b.bbox[0]) >= (a.bbox[2] + b.bbox[2]) / 2
                sep_y = abs(a.bbox[1] - b.bbox[1]) >= (a.bbox[3] + b.bbox[3]) / 2
                if not (sep_x or sep_y):
                    raise ValueError(f"{self.image_id}: {a.id} and {b.id} overlap")

    def crisp_scene(self) -> CrispScene:
        return CrispScene.from_labels(
            {o.id: dict(o.labels) for o in self.objects},
            {o.id: (o.bbox[0], o.bbox[1]) for o in self.objects},
        )


def _size_scale(spec: SceneSpec, label: str) -> float:
    vocab = spec.size_vocab
    if len(vocab) == 1:
        return 0.18
    i = vocab.index(label)
    return 0.12 + 0.12 * i / (len(vocab) - 1)


def _noisy_dist(
    vocab: tuple[str, ...], label: str, sigma: float, rng_noise: np.random.Generator
) -> dict[str, float]:
    if sigma == 0.0:
        return {label: 1.0}
    logits = np.array([1.0 if v == label else 0.0 for v in vocab])
    logits = (logits + rng_noise.normal(0.0, sigma, len(vocab))) / TEMPERATURE
    z = np.exp(logits - logits.max())
    z /= z.sum()
    return {v: float(p) for v, p in zip(vocab, z)}


def _sample_scene(
    rng_structure: np.random.Generator,
    rng_noise: np.random.Generator,
    spec: SceneSpec,
    image_id: str,
    forced: list[dict[str, str]] | None = None,
    exact_count: int | None = None,
) -> tuple[SceneRecord, GroundTruthScene]:
    forced = forced or []
    if exact_count is not None:
        count = exact_count
    else:
        lo = max(spec.object_count_range[0], len(forced))
        hi = max(spec.object_count_range[1], lo)
        count = int(rng_structure.integers(lo, hi + 1))
    if count < len(forced):
        raise ValueError("more forced objects than the scene holds")
    if count > len(GRID) ** 2:
        raise ValueError(f"{count} objects exceed the {len(GRID) ** 2} grid cells")

    for family in FAMILIES:
        if not spec.vocab(family):
            raise ValueError(f"empty {family} vocabulary")

    cell_ids = rng_structure.choice(len(GRID) ** 2, size=count, replace=False)
    truth_objects: list[TruthObject] = []
    detections: list[DetectedObject] = []
    for i in range(count):
        labels = {
            family: str(rng_structure.choice(spec.vocab(family))) for family in FAMILIES
        }
        if i < len(forced):
            labels.update(forced[i])
        scale = _size_scale(spec, labels["size"])
        cx = GRID[int(cell_ids[i]) % len(GRID)]
        cy = GRID[int(cell_ids[i]) // len(GRID)]
        obj_id = f"obj{i + 1}"
        truth_objects.append(TruthObject(obj_id, (cx, cy, scale, scale), labels))

        if spec.noise > 0:
            jitter = rng_noise.normal(0.0, spec.noise / 4, 2)
            dcx = float(np.clip(cx + jitter[0], 0.0, 1.0))
            dcy = float(np.clip(cy + jitter[1], 0.0, 1.0))
        else:
            dcx, dcy = cx, cy
        dists = {
            family: _noisy_dist(spec.vocab(family), labels[family], spec.noise, rng_noise)
            for family in FAMILIES
        }
        detections.append(
            DetectedObject(
                obj_id,
                (dcx, dcy, scale, scale),
                shape_dist=dists["shape"],
                color_dist=dists["color"],
                size_dist=dists["size"],
                class_dist=dists["class"],
            )
        )
    truth = GroundTruthScene(image_id, tuple(truth_objects))
    return SceneRecord(image_id, tuple(detections)), truth


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    structure_seq, noise_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(structure_seq), np.random.default_rng(noise_seq)


def generate_pool(spec: SceneSpec, count: int) -> tuple[ScenePool, list[GroundTruthScene]]:
    """Deterministically sample `count` scenes plus their ground truth."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng_structure, rng_noise = _streams(spec.seed)
    scenes, truths = [], []
    for i in range(count):
        scene, truth = _sample_scene(rng_structure, rng_noise, spec, f"scene{i:05d}")
        scenes.append(scene)
        truths.append(truth)
    return ScenePool(tuple(scenes)), truths


def generate_planted_pool(
    spec: SceneSpec,
    count: int,
    n_matches: int,
    forced_labels: list[dict[str, str]],
    program: RuleProgram,
) -> tuple[ScenePool, list[GroundTruthScene], set[str]]:
    """Pool with exactly `n_matches` scenes whose ground truth satisfies `program`.

    Matching scenes get `forced_labels` stamped onto their first objects;
    the rest are rejection-sampled until the crisp oracle refuses them.
    Returns the pool, per-scene truth, and the matching image ids.
    """
    if not 0 <= n_matches <= count:
        raise ValueError("n_matches must lie within the pool size")
    rng_structure, rng_noise = _streams(spec.seed)
    match_positions = set(
        int(i) for i in rng_structure.choice(count, size=n_matches, replace=False)
    )
    scenes, truths, match_ids = [], [], set()
    for i in range(count):
        image_id = f"scene{i:05d}"
        if i in match_positions:
            scene, truth = _sample_scene(
                rng_structure, rng_noise, spec, image_id, forced=forced_labels
            )
            if not crisp_eval(truth.crisp_scene(), program):
                raise ValueError("forced labels do not satisfy the program")
            match_ids.add(image_id)
        else:
            for _ in range(1000):
                scene, truth = _sample_scene(rng_structure, rng_noise, spec, image_id)
                if not crisp_eval(truth.crisp_scene(), program):
                    break
            else:
                raise ValueError("could not sample a non-matching scene")
        scenes.append(scene)
        truths.append(truth)
    return ScenePool(tuple(scenes)), truths, match_ids


# ---------------------------------------------------------------------------
# Counting benchmark
# ---------------------------------------------------------------------------

def count_rule(class_name: str, k: int) -> RuleProgram:
    """Rule that is (softly) true when a scene has exactly k `class_name` objects.

    Under product semantics this scores P(count >= k) * (1 - P(count >= k+1)),
    an approximation of P(count == k); exact for crisp counts.
    """
    source = (
        f"kp :- at_least(class, {class_name}, {k}), "
        f"not at_least(class, {class_name}, {k + 1})."
    )
    return parse_program(source, query="kp")


def bench_count(
    groups: list[int],
    per_group: int,
    class_name: str,
    spec: SceneSpec,
    cfg: ValuationConfig | None = None,
    weights_theta: float | None = None,
) -> list[dict]:
    """Score each group of exact-count scenes against every group's rule.

    Group i scenes hold exactly i `class_name` objects plus 1-3 distractor
    objects of other classes. Rows come out as dicts with keys
    group/rule/image_id/prob, prob being the normalized score.
    """
    if any(g < 0 or g > E_MAX_DEFAULT for g in groups):
        raise ValueError(f"groups must lie in 0..{E_MAX_DEFAULT}")
    cfg = cfg or ValuationConfig()
    others = [c for c in spec.class_vocab if c != class_name]
    if not others:
        raise ValueError("need at least one distractor class")
    rules = {k: count_rule(class_name, k) for k in groups}
    weights = {
        k: (
            ClauseWeights.from_program(rule)
            if weights_theta is None
            else ClauseWeights.uniform(len(rule.clauses), weights_theta)
        )
        for k, rule in rules.items()
    }

    rng_structure, rng_noise = _streams(spec.seed)
    rows: list[dict] = []
    for group in groups:
        for i in range(per_group):
            d_max = min(3, len(GRID) ** 2 - group, E_MAX_DEFAULT - group)
            d = int(rng_structure.integers(1, d_max + 1)) if d_max >= 1 else 0
            forced = [{"class": class_name}] * group + [
                {"class": str(rng_structure.choice(others))} for _ in range(d)
            ]
            scene, _ = _sample_scene(
                rng_structure,
                rng_noise,
                spec,
                f"g{group}s{i:04d}",
                forced=forced,
                exact_count=group + d,
            )
            for k, rule in rules.items():
                result = evaluate_scene(rule, scene, cfg, weights[k])
                rows.append(
                    {
                        "group": group,
                        "rule": k,
                        "image_id": scene.image_id,
                        "prob": result.normalized_prob,
                    }
                )
    return rows


def write_bench_csv(rows: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "rule", "image_id", "prob"])
        for row in rows:
            writer.writerow([row["group"], row["rule"], row["image_id"], repr(row["prob"])])


# ---------------------------------------------------------------------------
# Ground-truth serialization
# ---------------------------------------------------------------------------

def truth_to_dict(truth: GroundTruthScene) -> dict:
    return {
        "image_id": truth.image_id,
        "objects": [
            {"id": o.id, "bbox": list(o.bbox), "labels": o.labels} for o in truth.objects
        ],
    }


def dump_truths(truths: list[GroundTruthScene], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for truth in truths:
            fh.write(json.dumps(truth_to_dict(truth)) + "\n")
