"""Shared generators for randomized tests: scenes, programs, finite differences."""

from __future__ import annotations

import numpy as np

from logicrank.reasoner import ClauseWeights, Grounding, infer
from logicrank.rules import RuleProgram, parse_program
from logicrank.scene import DetectedObject, GroundAtomTable, SceneRecord

SHAPES = ("sphere", "cube", "cylinder")
COLORS = ("red", "blue", "green")


def random_scene(rng: np.random.Generator, n_objects: int | None = None) -> SceneRecord:
    if n_objects is None:
        n_objects = int(rng.integers(1, 5))
    objs = []
    for i in range(n_objects):
        objs.append(
            DetectedObject(
                f"obj{i + 1}",
                (float(rng.random()), float(rng.random()), 0.1, 0.1),
                shape_dist=_dist(rng, SHAPES),
                color_dist=_dist(rng, COLORS),
            )
        )
    return SceneRecord(f"s{int(rng.integers(10 ** 9))}", tuple(objs))


def _dist(rng: np.random.Generator, vocab: tuple[str, ...]) -> dict[str, float]:
    raw = rng.random(len(vocab))
    raw = raw / raw.sum() * float(rng.uniform(0.3, 1.0))
    return {v: float(p) for v, p in zip(vocab, raw)}


def random_program(rng: np.random.Generator, allow_negation: bool = True) -> RuleProgram:
    """Random acyclic stratified program, <= 3 clauses.

    Derived predicates p0, p1, ... are defined in order; a clause body only
    references built-ins and strictly earlier predicates, so every sample is
    acyclic and stratified by construction.
    """
    n_preds = int(rng.integers(1, 4))
    clause_budget = 3
    lines: list[str] = []
    defined: list[tuple[str, int]] = []  # (name, arity)
    for pi in range(n_preds):
        # reserve one clause for every predicate still to be defined
        max_here = clause_budget - (n_preds - pi - 1)
        n_clauses = int(rng.integers(1, max_here + 1))
        arity = int(rng.integers(0, 2))
        name = f"p{pi}"
        for _ in range(n_clauses):
            lines.append(_random_clause(rng, name, arity, defined, allow_negation))
            clause_budget -= 1
        defined.append((name, arity))
    return parse_program("\n".join(lines), query=defined[-1][0])


def _random_clause(
    rng: np.random.Generator,
    head: str,
    arity: int,
    defined: list[tuple[str, int]],
    allow_negation: bool,
) -> str:
    variables = ["X", "Y"][: int(rng.integers(1, 3))]
    head_text = f"{head}({variables[0]})" if arity == 1 else head
    literals: list[str] = []
    n_lits = int(rng.integers(1, 4))
    for _ in range(n_lits):
        kind = rng.choice(["attr", "attr", "position", "at_least", "derived"])
        negated = allow_negation and rng.random() < 0.25
        if kind == "derived" and defined:
            dname, darity = defined[int(rng.integers(0, len(defined)))]
            atom = f"{dname}({rng.choice(variables)})" if darity == 1 else dname
        elif kind == "position" and len(variables) >= 2:
            rel = rng.choice(["above", "below", "left", "right"])
            atom = f"position({variables[0]}, {variables[1]}, {rel})"
        elif kind == "at_least":
            family, vocab = ("shape", SHAPES) if rng.random() < 0.5 else ("color", COLORS)
            atom = f"at_least({family}, {rng.choice(vocab)}, {int(rng.integers(0, 4))})"
        else:
            family, vocab = ("shape", SHAPES) if rng.random() < 0.5 else ("color", COLORS)
            atom = f"{family}({rng.choice(variables)}, {rng.choice(vocab)})"
        literals.append(f"not {atom}" if negated else atom)

    # safety: anchor every used variable in a positive attribute literal.
    # Variables and everything else in a literal never share a letter, so
    # plain membership identifies variable occurrences.
    used = _vars_of(head_text) | {v for lit in literals for v in _vars_of(lit)}
    for v in sorted(used):
        anchored = any(v in _vars_of(lit) for lit in literals if not lit.startswith("not "))
        if not anchored:
            literals.append(f"shape({v}, {rng.choice(SHAPES)})")
    return f"{head_text} :- {', '.join(literals)}."


def _vars_of(text: str) -> set[str]:
    return {v for v in ("X", "Y") if v in text}


def random_table(rng: np.random.Generator, table: GroundAtomTable) -> GroundAtomTable:
    """Same atoms, fresh values drawn uniformly from [0.1, 0.9]."""
    return GroundAtomTable(table.atoms, rng.uniform(0.1, 0.9, len(table)))


def tie_margin(table: GroundAtomTable, grounding: Grounding, weights: ClauseWeights) -> float:
    """Smallest gap between the best and second-best derivation at any atom."""
    result = infer(table, grounding, weights)
    v = [float(x) for x in result.valuation]
    by_head: dict[int, list] = {}
    for gc in grounding.clauses:
        by_head.setdefault(gc.head_atom_index, []).append(gc)
    margin = float("inf")
    for head, clauses in by_head.items():
        if len(clauses) < 2:
            continue
        contribs = sorted(
            (_contribution(v, gc, weights.weight(gc.clause_index)) for gc in clauses),
            reverse=True,
        )
        margin = min(margin, contribs[0] - contribs[1])
    qs = sorted((v[i] for i in grounding.query_atom_indices), reverse=True)
    if len(qs) >= 2:
        margin = min(margin, qs[0] - qs[1])
    return margin


def _contribution(v, gc, w):
    acc = w
    for idx, negated in gc.body:
        acc *= (1.0 - v[idx]) if negated else v[idx]
    return acc


def fd_gradients(table, grounding, weights, h: float = 1e-5):
    """Central finite differences of query_prob w.r.t. theta and fact values."""

    def query(tab, ws):
        return infer(tab, grounding, ws).query_prob

    d_theta = np.zeros(len(weights.params))
    for i in range(len(weights.params)):
        up, down = weights.params.copy(), weights.params.copy()
        up[i] += h
        down[i] -= h
        d_theta[i] = (query(table, ClauseWeights(up)) - query(table, ClauseWeights(down))) / (2 * h)

    d_facts = np.zeros(len(table))
    for i in range(len(table)):
        up, down = table.values.copy(), table.values.copy()
        up[i] += h
        down[i] -= h
        d_facts[i] = (
            query(GroundAtomTable(table.atoms, up), weights)
            - query(GroundAtomTable(table.atoms, down), weights)
        ) / (2 * h)
    return d_theta, d_facts
