"""Object-centric scenes and the fact valuation that feeds the reasoner.

A scene is a set of detected objects, each with a normalized center-format
bounding box and per-family attribute probability distributions. Valuation
turns the atoms mentioned by a rule program into probabilities:

* attribute atoms read the detector distribution entry (absent entries
  value to 0 - detectors emit truncated top-k distributions);
* position atoms are a logistic of center displacement with slope ``tau``
  (overlapping centers score 0.5; ``position(a, b, right)`` reads "a is
  right of b"; y grows downward so "above" means smaller cy);
* at_least atoms are exact Poisson-binomial tail probabilities, treating
  objects as independent Bernoulli trials.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .predicates import ATTRIBUTE_PREDICATES, COUNT_PREDICATE, SPATIAL_RELATIONS
from .rules import RuleProgram

E_MAX_DEFAULT = 16

_SUM_SLACK = 1e-6


class SchemaError(Exception):
    """A detections file violates the pool-level schema contract."""


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def bbox_corner_to_center(
    x: float, y: float, w: float, h: float, image_w: float, image_h: float
) -> tuple[float, float, float, float]:
    """Convert a pixel-space corner box to the normalized center format."""
    return ((x + w / 2) / image_w, (y + h / 2) / image_h, w / image_w, h / image_h)


def _check_dist(name: str, dist: dict[str, float] | None) -> None:
    if dist is None:
        return
    total = 0.0
    for key, p in dist.items():
        if not isinstance(p, (int, float)) or math.isnan(p) or p < 0.0 or p > 1.0:
            raise ValueError(f"{name}[{key!r}] = {p!r} is not a probability")
        total += p
    if total > 1.0 + _SUM_SLACK:
        raise ValueError(f"{name} probabilities sum to {total}, more than 1")


@dataclass(frozen=True)
class DetectedObject:
    id: str
    bbox: tuple[float, float, float, float]  # (cx, cy, w, h), normalized
    shape_dist: dict[str, float] | None = None
    color_dist: dict[str, float] | None = None
    size_dist: dict[str, float] | None = None
    class_dist: dict[str, float] | None = None

    def __post_init__(self):
        cx, cy, w, h = self.bbox
        if not (0.0 <= cx <= 1.0 and 0.0 <= cy <= 1.0):
            raise ValueError(f"object {self.id}: center {cx, cy} outside [0, 1]")
        if not (0.0 < w <= 1.0 and 0.0 < h <= 1.0):
            raise ValueError(f"object {self.id}: box size {w, h} outside (0, 1]")
        for family in ATTRIBUTE_PREDICATES:
            _check_dist(f"object {self.id}: {family}", self.dist_for(family))

    def dist_for(self, family: str) -> dict[str, float] | None:
        if family not in ATTRIBUTE_PREDICATES:
            raise ValueError(f"unknown attribute predicate {family!r}")
        return getattr(self, f"{family}_dist")

    @property
    def cx(self) -> float:
        return self.bbox[0]

    @property
    def cy(self) -> float:
        return self.bbox[1]


@dataclass(frozen=True)
class SceneRecord:
    image_id: str
    objects: tuple[DetectedObject, ...]
    external_scores: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError(f"scene {self.image_id}: duplicate object ids")

    def object_by_id(self, obj_id: str) -> DetectedObject:
        for obj in self.objects:
            if obj.id == obj_id:
                return obj
        raise KeyError(obj_id)


@dataclass(frozen=True)
class BadScene:
    """Pool entry that failed record-level validation; ranked with score 0."""

    image_id: str
    error: str


@dataclass(frozen=True)
class ScenePool:
    entries: tuple  # SceneRecord | BadScene, in candidate order

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class ValuationConfig:
    tau: float = 0.05  # spatial logistic slope, normalized-coordinate units
    count_mode: str = "poisson_binomial"
    distribution_missing_policy: str = "zero"
    e_max: int = E_MAX_DEFAULT

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.count_mode != "poisson_binomial":
            raise ValueError(f"unknown count mode {self.count_mode!r}")
        if self.distribution_missing_policy != "zero":
            raise ValueError(f"unknown missing policy {self.distribution_missing_policy!r}")


# ---------------------------------------------------------------------------
# Ground atoms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroundAtom:
    predicate: str
    args: tuple  # str object ids / value names, int counts

    def text(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({', '.join(str(a) for a in self.args)})"


def _atom_sort_key(atom: GroundAtom):
    return (
        atom.predicate,
        tuple((0, a, "") if isinstance(a, int) else (1, 0, a) for a in atom.args),
    )


@dataclass(frozen=True)
class GroundAtomTable:
    atoms: tuple[GroundAtom, ...]
    values: np.ndarray  # float64 in [0, 1], aligned with atoms
    index: dict[GroundAtom, int] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.index:
            object.__setattr__(
                self, "index", {atom: i for i, atom in enumerate(self.atoms)}
            )

    def __len__(self) -> int:
        return len(self.atoms)

    def value_of(self, atom: GroundAtom) -> float:
        return float(self.values[self.index[atom]])


def make_table(pairs: list[tuple[GroundAtom, float]]) -> GroundAtomTable:
    """Build a canonically ordered table from (atom, value) pairs."""
    pairs = sorted(pairs, key=lambda p: _atom_sort_key(p[0]))
    atoms = tuple(p[0] for p in pairs)
    values = np.array([p[1] for p in pairs], dtype=np.float64)
    return GroundAtomTable(atoms, values)


# ---------------------------------------------------------------------------
# Valuation
# ---------------------------------------------------------------------------

def value_attribute(obj: DetectedObject, predicate: str, value: str) -> float:
    """Probability that `obj` carries `value` in the given attribute family."""
    dist = obj.dist_for(predicate)
    if dist is None:
        return 0.0
    return float(dist.get(value, 0.0))


def value_position(
    a: DetectedObject, b: DetectedObject, relation: str, cfg: ValuationConfig
) -> float:
    # below/left are complements of the same displacement so that
    # above+below (left+right) sum to exactly 1.
    if relation == "above":
        return sigmoid((b.cy - a.cy) / cfg.tau)
    if relation == "below":
        return 1.0 - sigmoid((b.cy - a.cy) / cfg.tau)
    if relation == "right":
        return sigmoid((a.cx - b.cx) / cfg.tau)
    if relation == "left":
        return 1.0 - sigmoid((a.cx - b.cx) / cfg.tau)
    raise ValueError(f"unknown relation {relation!r}")


def poisson_binomial_tail(probs: list[float], k: int) -> float:
    """P(successes >= k) for independent Bernoulli trials, O(len(probs) * k)."""
    if k <= 0:
        return 1.0
    if k > len(probs):
        return 0.0
    # state[j] = P(exactly j successes so far) for j < k; state[k] = P(>= k).
    state = [0.0] * (k + 1)
    state[0] = 1.0
    for p in probs:
        q = 1.0 - p
        tail = state[k] + state[k - 1] * p
        for j in range(k - 1, 0, -1):
            state[j] = state[j] * q + state[j - 1] * p
        state[0] *= q
        state[k] = tail
    return min(1.0, max(0.0, state[k]))


def value_at_least(scene: SceneRecord, predicate: str, value: str, k: int) -> float:
    if k < 0:
        raise ValueError("k must be >= 0")
    probs = [value_attribute(obj, predicate, value) for obj in scene.objects]
    return poisson_binomial_tail(probs, k)


def _mentioned(program: RuleProgram):
    """(attribute values, relations, count triples) referenced by body literals."""
    attr_values: dict[str, set[str]] = {p: set() for p in ATTRIBUTE_PREDICATES}
    relations: set[str] = set()
    counts: set[tuple[str, str, int]] = set()
    for clause in program.clauses:
        for lit in clause.body:
            atom = lit.atom
            if atom.predicate in ATTRIBUTE_PREDICATES:
                attr_values[atom.predicate].add(atom.args[1].name)
            elif atom.predicate == "position":
                relations.add(atom.args[2].name)
            elif atom.predicate == COUNT_PREDICATE:
                family, value, k = atom.args
                counts.add((family.name, value.name, int(k.name)))
    return attr_values, relations, counts


def input_atoms(scene: SceneRecord, program: RuleProgram) -> tuple[GroundAtom, ...]:
    """Canonically ordered ground atoms the program can reach over the scene.

    Attribute atoms are enumerated per object and mentioned value, position
    atoms per ordered pair of distinct objects and mentioned relation, and
    at_least atoms once per mentioned (family, value, k) triple. Grounding
    indexes into exactly this enumeration.
    """
    attr_values, relations, counts = _mentioned(program)
    atoms: list[GroundAtom] = []
    for family, values in attr_values.items():
        for obj in scene.objects:
            for value in values:
                atoms.append(GroundAtom(family, (obj.id, value)))
    for a in scene.objects:
        for b in scene.objects:
            if a.id == b.id:
                continue
            for rel in relations:
                atoms.append(GroundAtom("position", (a.id, b.id, rel)))
    for family, value, k in counts:
        atoms.append(GroundAtom(COUNT_PREDICATE, (family, value, k)))
    return tuple(sorted(atoms, key=_atom_sort_key))


def value_ground_atom(scene: SceneRecord, atom: GroundAtom, cfg: ValuationConfig) -> float:
    if atom.predicate in ATTRIBUTE_PREDICATES:
        obj_id, value = atom.args
        return value_attribute(scene.object_by_id(obj_id), atom.predicate, value)
    if atom.predicate == "position":
        a_id, b_id, rel = atom.args
        return value_position(scene.object_by_id(a_id), scene.object_by_id(b_id), rel, cfg)
    if atom.predicate == COUNT_PREDICATE:
        family, value, k = atom.args
        return value_at_least(scene, family, value, k)
    raise ValueError(f"{atom.text()} is not a valued atom")


def build_atom_table(
    scene: SceneRecord, program: RuleProgram, cfg: ValuationConfig
) -> GroundAtomTable:
    """Value every ground atom reachable by grounding the program over the scene."""
    if len(scene.objects) > cfg.e_max:
        raise ValueError(
            f"scene {scene.image_id} has {len(scene.objects)} objects, cap is {cfg.e_max}"
        )
    atoms = input_atoms(scene, program)
    values = np.array([value_ground_atom(scene, atom, cfg) for atom in atoms], dtype=np.float64)
    return GroundAtomTable(atoms, values)


# ---------------------------------------------------------------------------
# Detections file format
# ---------------------------------------------------------------------------

SCHEMA_VERSION = 1


def scene_from_dict(record: dict) -> SceneRecord:
    """Decode one detections record. Unknown fields are ignored.

    Raises SchemaError for pool-level contract violations (version, id) and
    ValueError for record-level ones (bad probabilities, bad boxes).
    """
    if not isinstance(record, dict):
        raise SchemaError("detections record must be a JSON object")
    version = record.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r}")
    image_id = record.get("image_id")
    if not isinstance(image_id, str) or not image_id:
        raise SchemaError("missing image_id")
    raw_objects = record.get("objects", [])
    if not isinstance(raw_objects, list):
        raise ValueError(f"scene {image_id}: objects must be an array")
    objects = []
    for i, raw in enumerate(raw_objects):
        if not isinstance(raw, dict) or "bbox" not in raw:
            raise ValueError(f"scene {image_id}: object {i} has no bbox")
        bbox = raw["bbox"]
        if not (isinstance(bbox, list) and len(bbox) == 4):
            raise ValueError(f"scene {image_id}: object {i} bbox must be [cx, cy, w, h]")
        objects.append(
            DetectedObject(
                id=f"obj{i + 1}",
                bbox=tuple(float(v) for v in bbox),
                shape_dist=raw.get("shape"),
                color_dist=raw.get("color"),
                size_dist=raw.get("size"),
                class_dist=raw.get("class"),
            )
        )
    scores = record.get("external_scores") or {}
    if not isinstance(scores, dict):
        raise ValueError(f"scene {image_id}: external_scores must be a map")
    return SceneRecord(image_id, tuple(objects), {k: float(v) for k, v in scores.items()})


def scene_to_dict(scene: SceneRecord) -> dict:
    record: dict = {"schema_version": SCHEMA_VERSION, "image_id": scene.image_id}
    objects = []
    for obj in scene.objects:
        entry: dict = {"bbox": list(obj.bbox)}
        for family in ATTRIBUTE_PREDICATES:
            dist = obj.dist_for(family)
            if dist is not None:
                entry[family] = dist
        objects.append(entry)
    record["objects"] = objects
    if scene.external_scores:
        record["external_scores"] = scene.external_scores
    return record


def load_scene(path: str) -> SceneRecord:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            record = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    return scene_from_dict(record)


def load_pool(path: str) -> ScenePool:
    """Read a JSONL candidate pool; line order is candidate order.

    File-level problems (bad JSON, bad schema_version, missing or duplicate
    image_id) raise SchemaError. Record-level validation failures become
    BadScene entries so one malformed detection cannot sink the pool.
    """
    entries: list = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            try:
                scene = scene_from_dict(record)
            except SchemaError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc
            except ValueError as exc:
                image_id = record.get("image_id")
                if not isinstance(image_id, str) or not image_id:
                    raise SchemaError(f"{path}:{lineno}: missing image_id") from exc
                if image_id in seen:
                    raise SchemaError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
                seen.add(image_id)
                entries.append(BadScene(image_id, str(exc)))
                continue
            if scene.image_id in seen:
                raise SchemaError(f"{path}:{lineno}: duplicate image_id {scene.image_id!r}")
            seen.add(scene.image_id)
            entries.append(scene)
    return ScenePool(tuple(entries))


def dump_pool(pool: ScenePool, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in pool.entries:
            fh.write(json.dumps(scene_to_dict(entry)) + "\n")
