"""logicrank: probabilistic-logic reranking of object-centric detections."""

from .rules import (
    Atom,
    Clause,
    Literal,
    RuleError,
    RuleProgram,
    Term,
    format_atom,
    load_program,
    parse_program,
)
from .scene import (
    DetectedObject,
    GroundAtom,
    GroundAtomTable,
    SceneRecord,
    ScenePool,
    SchemaError,
    ValuationConfig,
    build_atom_table,
    load_pool,
    load_scene,
    value_at_least,
    value_attribute,
    value_position,
)
from .reasoner import (
    ClauseWeights,
    EvaluationError,
    GroundClause,
    Grounding,
    InferenceResult,
    evaluate_scene,
    gradients,
    ground,
    infer,
)
from .rerank import RankedResult, explain, rank_pool
from .scenegen import SceneSpec, bench_count, generate_pool

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "Clause",
    "ClauseWeights",
    "DetectedObject",
    "EvaluationError",
    "GroundAtom",
    "GroundAtomTable",
    "GroundClause",
    "Grounding",
    "InferenceResult",
    "Literal",
    "RankedResult",
    "RuleError",
    "RuleProgram",
    "SceneRecord",
    "ScenePool",
    "SceneSpec",
    "SchemaError",
    "Term",
    "ValuationConfig",
    "bench_count",
    "build_atom_table",
    "evaluate_scene",
    "explain",
    "format_atom",
    "generate_pool",
    "gradients",
    "ground",
    "infer",
    "load_pool",
    "load_program",
    "load_scene",
    "parse_program",
    "rank_pool",
    "value_at_least",
    "value_attribute",
    "value_position",
]
