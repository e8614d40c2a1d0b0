"""Weighted forward-chaining inference over ground atoms, with gradients.

Semantics: product t-norm for conjunction, 1 - v for (stratified) negation,
hard max both for aggregating multiple derivations of the same atom and for
joining with the previous valuation. Hard max is idempotent, so iteration
within a stratum converges exactly on finite groundings; its derivative is
piecewise and follows the argmax branch.

The query score is the converged value of the query atom; the reported
score is its n-th root, where n is the body length of the ground clause
that won the query (root compensates for products over many atoms
shrinking toward zero).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .predicates import is_builtin, object_positions
from .rules import Atom, Clause, RuleProgram, DEFAULT_WEIGHT_PARAM
from .scene import (
    GroundAtom,
    GroundAtomTable,
    SceneRecord,
    ValuationConfig,
    build_atom_table,
    input_atoms,
    sigmoid,
)

GROUNDING_LIMIT = 1_000_000
TIE_EPS = 1e-9


class EvaluationError(Exception):
    pass


class GroundingError(EvaluationError):
    pass


class ConvergenceError(EvaluationError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class GradientTieError(EvaluationError):
    """Competing derivations are tied; only a subgradient is defined here."""


@dataclass(frozen=True)
class ClauseWeights:
    """Unconstrained per-clause parameters theta; clause weight = sigmoid(theta)."""

    params: np.ndarray

    @staticmethod
    def uniform(n_clauses: int, theta: float = DEFAULT_WEIGHT_PARAM) -> "ClauseWeights":
        return ClauseWeights(np.full(n_clauses, float(theta)))

    @staticmethod
    def exact_ones(n_clauses: int) -> "ClauseWeights":
        # sigmoid saturates to exactly 1.0 in float64 from ~theta >= 37
        return ClauseWeights(np.full(n_clauses, math.inf))

    @staticmethod
    def from_program(program: RuleProgram) -> "ClauseWeights":
        return ClauseWeights(np.array([c.weight_param for c in program.clauses], dtype=float))

    def weight(self, clause_index: int) -> float:
        return sigmoid(float(self.params[clause_index]))

    def __len__(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class GroundClause:
    clause_index: int
    binding: dict[str, str]
    head_atom_index: int
    body: tuple[tuple[int, bool], ...]  # (atom index, negated)

    def binding_key(self) -> tuple[str, ...]:
        return tuple(v for _, v in sorted(self.binding.items()))


@dataclass(frozen=True)
class Grounding:
    """Ground program over one scene: clauses plus the shared atom registry.

    Atoms 0..n_input-1 are the scene's valued input atoms (same order as
    the GroundAtomTable built for the same scene and program); the rest are
    derived atoms created by instantiating clause heads and bodies.
    """

    program: RuleProgram
    atoms: tuple[GroundAtom, ...]
    n_input: int
    clauses: tuple[GroundClause, ...]
    query_atom_indices: tuple[int, ...]
    # stratum per derived atom index (inputs are stratum 0)
    atom_strata: dict[int, int] = field(default_factory=dict, compare=False)

    def atom_text(self, index: int) -> str:
        return self.atoms[index].text()


def _clause_variables(clause: Clause) -> list[str]:
    seen: dict[str, None] = {}
    for lit in clause.body:
        for name in lit.atom.variables():
            seen.setdefault(name)
    for name in clause.head.variables():
        seen.setdefault(name)
    return sorted(seen)


def _instantiate(atom: Atom, binding: dict[str, str]) -> GroundAtom:
    args: list = []
    for pos, term in enumerate(atom.args):
        if term.is_variable:
            args.append(binding[term.name])
        elif atom.predicate == "at_least" and pos == 2:
            args.append(int(term.name))
        else:
            args.append(term.name)
    return GroundAtom(atom.predicate, tuple(args))


def ground(program: RuleProgram, scene: SceneRecord, e_max: int = 16) -> Grounding:
    """Instantiate every clause over every injective object-variable binding.

    Distinct variables bind distinct objects, so a clause with k variables
    over E objects yields E * (E-1) * ... * (E-k+1) ground instances; a
    variable-free clause grounds once. Ground instances whose body mentions
    an object id outside the scene (or a position pair that collapses onto
    one object) are unsatisfiable and dropped.
    """
    if len(scene.objects) > e_max:
        raise GroundingError(
            f"scene {scene.image_id} has {len(scene.objects)} objects, cap is {e_max}"
        )
    object_ids = sorted(o.id for o in scene.objects)
    id_set = set(object_ids)

    total = 0
    for clause in program.clauses:
        k = len(_clause_variables(clause))
        count = 1
        for j in range(k):
            count *= max(0, len(object_ids) - j)
        total += count
    if total > GROUNDING_LIMIT:
        raise GroundingError(f"{total} ground clauses exceed the {GROUNDING_LIMIT} limit")

    inputs = input_atoms(scene, program)
    registry: dict[GroundAtom, int] = {atom: i for i, atom in enumerate(inputs)}
    atoms: list[GroundAtom] = list(inputs)
    n_input = len(inputs)
    atom_strata: dict[int, int] = {}

    def derived_index(ground_atom: GroundAtom, stratum: int) -> int:
        idx = registry.get(ground_atom)
        if idx is None:
            idx = len(atoms)
            registry[ground_atom] = idx
            atoms.append(ground_atom)
            atom_strata[idx] = stratum
        return idx

    ground_clauses: list[GroundClause] = []
    for clause_index, clause in enumerate(program.clauses):
        variables = _clause_variables(clause)
        head_stratum = program.strata[clause.head.predicate]
        for assignment in itertools.permutations(object_ids, len(variables)):
            binding = dict(zip(variables, assignment))
            body: list[tuple[int, bool]] = []
            satisfiable = True
            for lit in clause.body:
                ground_atom = _instantiate(lit.atom, binding)
                if is_builtin(ground_atom.predicate):
                    idx = registry.get(ground_atom)
                    if idx is None or idx >= n_input:
                        satisfiable = False  # off-scene object id or collapsed pair
                        break
                else:
                    bad_ids = [
                        a
                        for pos, a in enumerate(ground_atom.args)
                        if pos in object_positions(ground_atom.predicate, len(ground_atom.args))
                        and a not in id_set
                    ]
                    if bad_ids:
                        satisfiable = False
                        break
                    idx = derived_index(
                        ground_atom, program.strata.get(ground_atom.predicate, 0)
                    )
                body.append((idx, lit.negated))
            if not satisfiable:
                continue
            head_atom = _instantiate(clause.head, binding)
            head_idx = derived_index(head_atom, head_stratum)
            ground_clauses.append(
                GroundClause(clause_index, binding, head_idx, tuple(body))
            )

    query_indices = tuple(
        i for i in range(n_input, len(atoms)) if atoms[i].predicate == program.query
    )
    return Grounding(
        program, tuple(atoms), n_input, tuple(ground_clauses), query_indices, atom_strata
    )


@dataclass(frozen=True)
class InferenceResult:
    valuation: np.ndarray  # over all ground atoms, inputs first
    query_prob: float
    normalized_prob: float
    n_atoms: int
    best_grounding: GroundClause | None
    per_atom: tuple[tuple[str, float], ...]
    iterations: int


def _contribution(v: list[float], gc: GroundClause, w: float) -> float:
    acc = w
    for idx, negated in gc.body:
        acc *= (1.0 - v[idx]) if negated else v[idx]
    return acc


def _check_table(table: GroundAtomTable, grounding: Grounding) -> None:
    if len(table) != grounding.n_input or table.atoms != grounding.atoms[: grounding.n_input]:
        raise ValueError("atom table does not match the grounding's input atoms")


def infer(
    table: GroundAtomTable,
    grounding: Grounding,
    weights: ClauseWeights,
    max_iters: int = 100,
    tol: float = 1e-9,
) -> InferenceResult:
    """Run forward chaining to a fixpoint, stratum by stratum.

    Derived atoms start at 0 and only grow under the max-join update, so
    the loop converges to the least fixpoint; `max_iters` sweeps per
    stratum guard pathological inputs.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    _check_table(table, grounding)
    if len(weights) != len(grounding.program.clauses):
        raise ValueError("one weight parameter per clause required")
    _check_strata(grounding)

    v: list[float] = [float(x) for x in table.values] + [0.0] * (
        len(grounding.atoms) - grounding.n_input
    )
    w = [weights.weight(i) for i in range(len(weights))]
    strata = grounding.program.strata
    by_stratum: dict[int, list[GroundClause]] = {}
    for gc in grounding.clauses:
        s = strata[grounding.program.clauses[gc.clause_index].head.predicate]
        by_stratum.setdefault(s, []).append(gc)

    iterations = 0
    for s in sorted(by_stratum):
        clauses = by_stratum[s]
        delta = math.inf
        for _ in range(max_iters):
            iterations += 1
            delta = 0.0
            for gc in clauses:
                new = _contribution(v, gc, w[gc.clause_index])
                if new > v[gc.head_atom_index]:
                    delta = max(delta, new - v[gc.head_atom_index])
                    v[gc.head_atom_index] = new
            if delta < tol:
                break
        else:
            raise ConvergenceError(
                f"stratum {s} did not converge within {max_iters} sweeps", delta
            )

    query_idx, best, best_contrib = _winning_clause(v, grounding, w)
    query_prob = v[query_idx] if query_idx is not None else 0.0
    per_atom: tuple[tuple[str, float], ...] = ()
    n_atoms = 0
    if best is not None:
        n_atoms = len(best.body)
        per_atom = tuple(
            (
                ("not " + grounding.atom_text(idx), 1.0 - v[idx])
                if negated
                else (grounding.atom_text(idx), v[idx])
            )
            for idx, negated in best.body
        )
    normalized = query_prob ** (1.0 / n_atoms) if n_atoms >= 1 else query_prob
    return InferenceResult(
        valuation=np.array(v),
        query_prob=query_prob,
        normalized_prob=normalized,
        n_atoms=n_atoms,
        best_grounding=best,
        per_atom=per_atom,
        iterations=iterations,
    )


def _check_strata(grounding: Grounding) -> None:
    # Defensive: negation must only look at strictly lower strata.
    strata = grounding.program.strata
    for clause in grounding.program.clauses:
        head_stratum = strata[clause.head.predicate]
        for lit in clause.body:
            if lit.negated and not is_builtin(lit.atom.predicate):
                if strata.get(lit.atom.predicate, 0) >= head_stratum:
                    raise EvaluationError(
                        f"unstratified negation of {lit.atom.predicate!r}"
                    )


def _winning_clause(
    v: list[float], grounding: Grounding, w: list[float]
) -> tuple[int | None, GroundClause | None, float]:
    """Query atom and ground clause achieving the query value.

    Ties break toward the lowest atom index, then lowest clause index, then
    lexicographically smallest binding (the construction order of
    `grounding.clauses` realizes the clause/binding order).
    """
    query_idx = None
    for idx in grounding.query_atom_indices:
        if query_idx is None or v[idx] > v[query_idx]:
            query_idx = idx
    if query_idx is None:
        return None, None, 0.0
    best = None
    best_contrib = -1.0
    for gc in grounding.clauses:
        if gc.head_atom_index != query_idx:
            continue
        contrib = _contribution(v, gc, w[gc.clause_index])
        if contrib > best_contrib:
            best, best_contrib = gc, contrib
    return query_idx, best, best_contrib


def fixpoint_residual(
    table: GroundAtomTable,
    grounding: Grounding,
    weights: ClauseWeights,
    valuation: np.ndarray,
) -> float:
    """Largest increase one extra update sweep would make on `valuation`."""
    _check_table(table, grounding)
    v = [float(x) for x in valuation]
    residual = 0.0
    for gc in grounding.clauses:
        new = _contribution(v, gc, weights.weight(gc.clause_index))
        residual = max(residual, new - v[gc.head_atom_index])
    return residual


def gradients(
    table: GroundAtomTable,
    grounding: Grounding,
    weights: ClauseWeights,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact derivatives of query_prob w.r.t. clause parameters and fact values.

    The max aggregation is piecewise: derivatives follow the argmax branch
    of the converged valuation. Raises GradientTieError when competing
    derivations sit within TIE_EPS of the max anywhere along that branch
    (only a subgradient exists there).
    """
    result = infer(table, grounding, weights)
    v = [float(x) for x in result.valuation]
    w = [weights.weight(i) for i in range(len(weights))]
    d_theta = np.zeros(len(weights))
    d_facts = np.zeros(grounding.n_input)

    clauses_by_head: dict[int, list[GroundClause]] = {}
    for gc in grounding.clauses:
        clauses_by_head.setdefault(gc.head_atom_index, []).append(gc)

    # Tie between competing query groundings counts as a tie as well.
    query_idx = None
    for idx in grounding.query_atom_indices:
        if query_idx is None or v[idx] > v[query_idx]:
            query_idx = idx
    if query_idx is None:
        return d_theta, d_facts
    near = [
        idx
        for idx in grounding.query_atom_indices
        if idx != query_idx and v[query_idx] - v[idx] <= TIE_EPS
    ]
    if near:
        raise GradientTieError(
            f"query groundings {grounding.atom_text(query_idx)} and "
            f"{grounding.atom_text(near[0])} are tied"
        )

    def argmax_clause(atom_idx: int) -> GroundClause | None:
        candidates = clauses_by_head.get(atom_idx)
        if not candidates:
            return None
        best, best_contrib = None, -1.0
        contribs = []
        for gc in candidates:
            contrib = _contribution(v, gc, w[gc.clause_index])
            contribs.append(contrib)
            if contrib > best_contrib:
                best, best_contrib = gc, contrib
        ties = sum(1 for c in contribs if best_contrib - c <= TIE_EPS)
        if ties > 1:
            raise GradientTieError(
                f"derivations of {grounding.atom_text(atom_idx)} are tied at "
                f"{best_contrib:.12f}"
            )
        return best

    active: set[int] = set()

    def backprop(atom_idx: int, adjoint: float) -> None:
        if adjoint == 0.0:
            return
        if atom_idx < grounding.n_input:
            d_facts[atom_idx] += adjoint
            return
        if atom_idx in active:
            return  # argmax cycle on a zero-valued atom; constant under perturbation
        gc = argmax_clause(atom_idx)
        if gc is None:
            return  # empty derived predicate, constant 0
        active.add(atom_idx)
        factors = [(1.0 - v[i]) if neg else v[i] for i, neg in gc.body]
        wc = w[gc.clause_index]
        d_theta[gc.clause_index] += adjoint * _sigmoid_grad(
            float(weights.params[gc.clause_index])
        ) * _product(factors)
        # prefix/suffix products make each partial exact even with zero factors
        n = len(factors)
        prefix = [1.0] * (n + 1)
        for i, f in enumerate(factors):
            prefix[i + 1] = prefix[i] * f
        suffix = [1.0] * (n + 1)
        for i in range(n - 1, -1, -1):
            suffix[i] = suffix[i + 1] * factors[i]
        for i, (idx, negated) in enumerate(gc.body):
            partial = wc * prefix[i] * suffix[i + 1]
            backprop(idx, adjoint * (-partial if negated else partial))
        active.discard(atom_idx)

    backprop(query_idx, 1.0)
    return d_theta, d_facts


def _product(factors: list[float]) -> float:
    acc = 1.0
    for f in factors:
        acc *= f
    return acc


def _sigmoid_grad(theta: float) -> float:
    s = sigmoid(theta)
    return s * (1.0 - s)


def evaluate_scene(
    program: RuleProgram,
    scene: SceneRecord,
    cfg: ValuationConfig | None = None,
    weights: ClauseWeights | None = None,
) -> InferenceResult:
    """Valuation, grounding, and inference composed over one scene."""
    cfg = cfg or ValuationConfig()
    weights = weights or ClauseWeights.from_program(program)
    table = build_atom_table(scene, program, cfg)
    grounding = ground(program, scene, e_max=cfg.e_max)
    return infer(table, grounding, weights)
