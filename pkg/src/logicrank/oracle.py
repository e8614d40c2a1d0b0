"""Independent reference evaluators used to cross-check the engine.

Three deliberately separate routes:

* `crisp_eval` - classical stratified Datalog over boolean facts, by naive
  exhaustive bottom-up evaluation;
* `recursive_fuzzy_eval` - the fuzzy semantics recomputed top-down with
  memoization (acyclic programs only), no fixpoint loop;
* `enumerate_count` - P(count >= k) by summing over all 2^E outcomes.

None of them share evaluation code with the reasoner or the DP counter.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .predicates import ATTRIBUTE_PREDICATES, COUNT_PREDICATE, is_builtin
from .rules import RuleProgram
from .reasoner import ClauseWeights, Grounding
from .scene import GroundAtom, GroundAtomTable, SceneRecord

ENUMERATION_CAP = 20


@dataclass(frozen=True)
class CrispScene:
    """Boolean scene: one label per attribute family, one bit per relation."""

    object_ids: tuple[str, ...]
    labels: dict[str, dict[str, str]]  # object id -> family -> label
    relations: dict[tuple[str, str, str], bool]  # (a, b, relation) -> a rel b

    @staticmethod
    def from_labels(
        labels: dict[str, dict[str, str]], centers: dict[str, tuple[float, float]]
    ) -> "CrispScene":
        """Derive relations from centers by strict comparison (y grows downward)."""
        relations: dict[tuple[str, str, str], bool] = {}
        for a, (ax, ay) in centers.items():
            for b, (bx, by) in centers.items():
                if a == b:
                    continue
                relations[(a, b, "above")] = ay < by
                relations[(a, b, "below")] = ay > by
                relations[(a, b, "right")] = ax > bx
                relations[(a, b, "left")] = ax < bx
        return CrispScene(tuple(sorted(labels)), labels, relations)

    @staticmethod
    def from_scene(scene: SceneRecord, threshold: float = 0.5) -> "CrispScene":
        labels: dict[str, dict[str, str]] = {}
        centers: dict[str, tuple[float, float]] = {}
        for obj in scene.objects:
            entry: dict[str, str] = {}
            for family in ATTRIBUTE_PREDICATES:
                dist = obj.dist_for(family) or {}
                for value, p in dist.items():
                    if p > threshold:
                        entry[family] = value
                        break
            labels[obj.id] = entry
            centers[obj.id] = (obj.cx, obj.cy)
        return CrispScene.from_labels(labels, centers)

    def holds(self, atom: GroundAtom) -> bool:
        pred = atom.predicate
        if pred in ATTRIBUTE_PREDICATES:
            obj_id, value = atom.args
            return self.labels.get(obj_id, {}).get(pred) == value
        if pred == "position":
            return self.relations.get(tuple(atom.args), False)
        if pred == COUNT_PREDICATE:
            family, value, k = atom.args
            count = sum(
                1 for obj in self.object_ids if self.labels.get(obj, {}).get(family) == value
            )
            return count >= k
        raise ValueError(f"{atom.text()} is not a valued atom")


def crisp_eval(scene: CrispScene, program: RuleProgram) -> bool:
    """Classical entailment of the query under stratified Datalog semantics."""
    derived: set[GroundAtom] = set()
    for stratum in sorted(set(program.strata.values())):
        clauses = [c for c in program.clauses if program.strata[c.head.predicate] == stratum]
        changed = True
        while changed:
            changed = False
            for clause in clauses:
                variables = sorted(
                    {v for lit in clause.body for v in lit.atom.variables()}
                    | set(clause.head.variables())
                )
                for assignment in itertools.permutations(scene.object_ids, len(variables)):
                    binding = dict(zip(variables, assignment))
                    if not _body_holds(clause, binding, scene, derived):
                        continue
                    head = _ground(clause.head, binding)
                    if head not in derived:
                        derived.add(head)
                        changed = True
    return any(atom.predicate == program.query for atom in derived)


def _ground(atom, binding: dict[str, str]) -> GroundAtom:
    args = []
    for pos, term in enumerate(atom.args):
        if term.is_variable:
            args.append(binding[term.name])
        elif atom.predicate == COUNT_PREDICATE and pos == 2:
            args.append(int(term.name))
        else:
            args.append(term.name)
    return GroundAtom(atom.predicate, tuple(args))


def _body_holds(clause, binding, scene: CrispScene, derived: set[GroundAtom]) -> bool:
    for lit in clause.body:
        ground_atom = _ground(lit.atom, binding)
        if is_builtin(ground_atom.predicate):
            holds = scene.holds(ground_atom)
        else:
            holds = ground_atom in derived
        if holds == lit.negated:
            return False
    return True


def recursive_fuzzy_valuation(
    table: GroundAtomTable, grounding: Grounding, weights: ClauseWeights
) -> np.ndarray:
    """Fuzzy value of every atom by top-down recursion (acyclic programs only)."""
    clauses_by_head: dict[int, list] = {}
    for gc in grounding.clauses:
        clauses_by_head.setdefault(gc.head_atom_index, []).append(gc)
    memo: dict[int, float] = {}
    active: set[int] = set()

    def value(idx: int) -> float:
        if idx < grounding.n_input:
            return float(table.values[idx])
        if idx in memo:
            return memo[idx]
        if idx in active:
            raise ValueError(
                f"cycle detected through {grounding.atom_text(idx)}; "
                "the recursive oracle only handles acyclic programs"
            )
        active.add(idx)
        best = 0.0
        for gc in clauses_by_head.get(idx, []):
            acc = weights.weight(gc.clause_index)
            for sub, negated in gc.body:
                acc *= (1.0 - value(sub)) if negated else value(sub)
            best = max(best, acc)
        active.discard(idx)
        memo[idx] = best
        return best

    return np.array([value(i) for i in range(len(grounding.atoms))])


def recursive_fuzzy_eval(
    table: GroundAtomTable, grounding: Grounding, weights: ClauseWeights
) -> float:
    valuation = recursive_fuzzy_valuation(table, grounding, weights)
    if not grounding.query_atom_indices:
        return 0.0
    return float(max(valuation[i] for i in grounding.query_atom_indices))


def enumerate_count(probs: list[float], k: int) -> float:
    """Exact P(count >= k) by exhaustive enumeration of all 2^E outcomes."""
    n = len(probs)
    if n > ENUMERATION_CAP:
        raise ValueError(f"{n} trials is beyond the 2^{ENUMERATION_CAP} enumeration cap")
    if k <= 0:
        return 1.0
    p = np.asarray(probs, dtype=np.float64)
    total = 0.0
    chunk = 1 << 16
    for start in range(0, 1 << n, chunk):
        outcomes = np.arange(start, min(start + chunk, 1 << n))
        bits = (outcomes[:, None] >> np.arange(n)) & 1
        mass = np.where(bits == 1, p, 1.0 - p).prod(axis=1)
        total += float(mass[bits.sum(axis=1) >= k].sum())
    return total
