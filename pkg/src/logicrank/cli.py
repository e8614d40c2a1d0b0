"""Command-line interface.

Exit codes: 0 success, 2 rule parse/validation error, 3 data/schema error,
4 internal evaluation error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .oracle import CrispScene, crisp_eval, recursive_fuzzy_eval
from .reasoner import ClauseWeights, EvaluationError, ground, infer
from .rerank import explain, rank_pool, results_to_jsonl
from .rules import RuleError, load_program
from .scene import (
    SceneRecord,
    SchemaError,
    ValuationConfig,
    build_atom_table,
    dump_pool,
    load_pool,
    load_scene,
)
from .scenegen import SceneSpec, bench_count, dump_truths, generate_pool, write_bench_csv

EXIT_RULE_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_EVAL_ERROR = 4


def _load_weights(path: str | None, n_clauses: int) -> ClauseWeights | None:
    """Weights file: JSON {"theta": x} (broadcast) or {"theta": [x, ...]}."""
    if path is None:
        return None
    with open(path, "r", encoding="utf-8") as fh:
        try:
            record = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(record, dict) or "theta" not in record:
        raise SchemaError(f"{path}: expected an object with a 'theta' field")
    theta = record["theta"]

    def to_float(x) -> float:
        if x in ("inf", "-inf"):
            return math.inf if x == "inf" else -math.inf
        return float(x)

    if isinstance(theta, list):
        if len(theta) != n_clauses:
            raise SchemaError(
                f"{path}: {len(theta)} weights for {n_clauses} clauses"
            )
        return ClauseWeights(np.array([to_float(x) for x in theta]))
    return ClauseWeights.uniform(n_clauses, to_float(theta))


def _parse_range(text: str, flag: str) -> tuple[int, int]:
    parts = text.split("..")
    if len(parts) != 2:
        raise SchemaError(f"{flag} expects MIN..MAX, got {text!r}")
    try:
        lo, hi = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise SchemaError(f"{flag} expects MIN..MAX, got {text!r}") from exc
    return lo, hi


def _cmd_rank(args) -> int:
    program = load_program(args.rules, query=args.query)
    cfg = ValuationConfig(tau=args.tau)
    weights = _load_weights(args.weights, len(program.clauses))
    pool = load_pool(args.detections)
    results = rank_pool(pool, program, cfg, weights, top_k=args.top)
    payload = results_to_jsonl(results)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)
    if args.explain:
        by_id = {
            entry.image_id: entry
            for entry in pool.entries
            if isinstance(entry, SceneRecord)
        }
        for result in results:
            scene = by_id.get(result.image_id)
            if scene is None:
                sys.stdout.write(f"image {result.image_id}\nerror: {result.error}\n\n")
            else:
                sys.stdout.write(explain(scene, program, cfg, weights) + "\n")
    return 0


def _cmd_explain(args) -> int:
    program = load_program(args.rules, query=args.query)
    cfg = ValuationConfig(tau=args.tau)
    weights = _load_weights(args.weights, len(program.clauses))
    scene = load_scene(args.scene)
    sys.stdout.write(explain(scene, program, cfg, weights))
    return 0


def _cmd_gen_scenes(args) -> int:
    lo, hi = _parse_range(args.objects, "--objects")
    spec = SceneSpec(object_count_range=(lo, hi), noise=args.noise, seed=args.seed)
    pool, truths = generate_pool(spec, args.n)
    dump_pool(pool, args.out)
    if args.truth:
        dump_truths(truths, args.truth)
    return 0


def _cmd_bench_count(args) -> int:
    lo, hi = _parse_range(args.groups, "--groups")
    spec = SceneSpec(noise=args.noise, seed=args.seed)
    rows = bench_count(list(range(lo, hi + 1)), args.per_group, getattr(args, "class"), spec)
    write_bench_csv(rows, args.out)
    return 0


def _cmd_oracle(args) -> int:
    program = load_program(args.rules, query=args.query)
    cfg = ValuationConfig(tau=args.tau)
    scene = load_scene(args.scene)
    weights = ClauseWeights.from_program(program)
    table = build_atom_table(scene, program, cfg)
    grounding = ground(program, scene, e_max=cfg.e_max)
    engine = infer(table, grounding, weights).query_prob
    recursive = recursive_fuzzy_eval(table, grounding, weights)
    crisp = crisp_eval(CrispScene.from_scene(scene), program)
    sys.stdout.write(
        f"engine: {engine!r}\nrecursive: {recursive!r}\n"
        f"difference: {abs(engine - recursive):.3e}\ncrisp: {crisp}\n"
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logicrank",
        description="Rank candidate scenes against a first-order rule program.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    rank = sub.add_parser("rank", help="score and order a JSONL candidate pool")
    rank.add_argument("--rules", required=True, help="rule program file")
    rank.add_argument("--query", required=True, help="query predicate")
    rank.add_argument("--detections", required=True, help="candidate pool (JSONL)")
    rank.add_argument("--top", type=int, default=None, help="emit only the top K")
    rank.add_argument("--out", default=None, help="write ranked JSONL here (default stdout)")
    rank.add_argument("--explain", action="store_true", help="also print per-candidate reports")
    rank.add_argument("--tau", type=float, default=0.05, help="spatial logistic slope")
    rank.add_argument("--weights", default=None, help="clause weights file (JSON)")
    rank.set_defaults(func=_cmd_rank)

    exp = sub.add_parser("explain", help="report one scene's winning grounding")
    exp.add_argument("--rules", required=True)
    exp.add_argument("--query", required=True)
    exp.add_argument("--scene", required=True, help="single-scene detections JSON")
    exp.add_argument("--tau", type=float, default=0.05)
    exp.add_argument("--weights", default=None)
    exp.set_defaults(func=_cmd_explain)

    gen = sub.add_parser("gen-scenes", help="sample a synthetic candidate pool")
    gen.add_argument("--n", type=int, required=True, help="number of scenes")
    gen.add_argument("--objects", default="2..6", help="object count range MIN..MAX")
    gen.add_argument("--noise", type=float, default=0.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="pool JSONL path")
    gen.add_argument("--truth", default=None, help="also write ground truth JSONL")
    gen.set_defaults(func=_cmd_gen_scenes)

    bench = sub.add_parser("bench-count", help="counting-separation benchmark CSV")
    bench.add_argument("--groups", required=True, help="group range MIN..MAX")
    bench.add_argument("--per-group", type=int, required=True)
    bench.add_argument("--class", required=True, help="target class name")
    bench.add_argument("--noise", type=float, default=0.0)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", required=True, help="CSV path")
    bench.set_defaults(func=_cmd_bench_count)

    oracle = sub.add_parser("oracle")  # debugging aid, hidden from help
    oracle.add_argument("--rules", required=True)
    oracle.add_argument("--query", required=True)
    oracle.add_argument("--scene", required=True)
    oracle.add_argument("--tau", type=float, default=0.05)
    oracle.set_defaults(func=_cmd_oracle)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RuleError as exc:
        print(f"rule error: {exc}", file=sys.stderr)
        return EXIT_RULE_ERROR
    except (SchemaError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except EvaluationError as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
