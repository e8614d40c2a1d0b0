"""Pool ranking and per-candidate explanation reports.

Every candidate is evaluated independently; a candidate that fails
validation or evaluation is kept in the ranking with score 0 and an error
note instead of sinking the pool. Results order by normalized score
descending, ties by image_id ascending, so identical inputs always produce
byte-identical output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .reasoner import ClauseWeights, EvaluationError, InferenceResult, evaluate_scene
from .rules import RuleProgram
from .scene import BadScene, SceneRecord, ScenePool, ValuationConfig


@dataclass(frozen=True)
class RankedResult:
    image_id: str
    rank: int  # 1-based
    normalized_prob: float
    query_prob: float
    n_atoms: int
    per_atom: tuple[tuple[str, float], ...]
    external_scores: dict[str, float] = field(default_factory=dict)
    error: str | None = None


def _scored(entry, program, cfg, weights) -> tuple[str, InferenceResult | None, str | None, dict]:
    if isinstance(entry, BadScene):
        return entry.image_id, None, entry.error, {}
    try:
        result = evaluate_scene(program, entry, cfg, weights)
    except (EvaluationError, ValueError) as exc:
        return entry.image_id, None, str(exc), dict(entry.external_scores)
    return entry.image_id, result, None, dict(entry.external_scores)


def rank_pool(
    pool: ScenePool,
    program: RuleProgram,
    cfg: ValuationConfig | None = None,
    weights: ClauseWeights | None = None,
    top_k: int | None = None,
) -> list[RankedResult]:
    """Score and order every candidate; `top_k` truncates output only."""
    if not pool.entries:
        raise ValueError("empty candidate pool")
    cfg = cfg or ValuationConfig()
    weights = weights or ClauseWeights.from_program(program)

    scored = [_scored(entry, program, cfg, weights) for entry in pool.entries]
    scored.sort(key=lambda s: (-(s[1].normalized_prob if s[1] else 0.0), s[0]))

    results = []
    for rank, (image_id, result, error, external) in enumerate(scored, start=1):
        if result is None:
            results.append(
                RankedResult(image_id, rank, 0.0, 0.0, 0, (), external, error)
            )
        else:
            results.append(
                RankedResult(
                    image_id,
                    rank,
                    result.normalized_prob,
                    result.query_prob,
                    result.n_atoms,
                    result.per_atom,
                    external,
                )
            )
    if top_k is not None:
        results = results[:top_k]
    return results


def explain(
    scene: SceneRecord,
    program: RuleProgram,
    cfg: ValuationConfig | None = None,
    weights: ClauseWeights | None = None,
) -> str:
    """Human-readable report: winning grounding's atoms, raw product, n, score."""
    result = evaluate_scene(program, scene, cfg, weights)
    lines = [f"image {scene.image_id}"]
    if result.best_grounding is None:
        lines.append(f"{program.query}: no grounding; score 0")
        return "\n".join(lines) + "\n"
    for text, prob in sorted(result.per_atom, key=lambda a: a[0].removeprefix("not ")):
        lines.append(f"{text}: {prob:.4f}")
    lines.append(f"raw: {result.query_prob:.4f}  (n = {result.n_atoms})")
    lines.append(f"{program.query}: {result.normalized_prob:.4f}")
    return "\n".join(lines) + "\n"


def result_to_dict(result: RankedResult) -> dict:
    record = {
        "image_id": result.image_id,
        "rank": result.rank,
        "score": result.normalized_prob,
        "raw_score": result.query_prob,
        "n": result.n_atoms,
        "atoms": [{"atom": text, "prob": prob} for text, prob in result.per_atom],
        "external_scores": result.external_scores,
    }
    if result.error is not None:
        record["error"] = result.error
    return record


def results_to_jsonl(results: list[RankedResult]) -> str:
    return "".join(json.dumps(result_to_dict(r)) + "\n" for r in results)
