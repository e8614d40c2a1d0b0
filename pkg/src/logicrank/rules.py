"""Rule language: AST, parser, and static validation.

Programs are written in a small Prolog-ish syntax::

    % two blue spheres and one red cube
    kp :- shape(O1, sphere), color(O1, blue),
          shape(O2, sphere), color(O2, blue),
          shape(O3, cube), color(O3, red).

Identifiers starting with an uppercase letter are variables and range
over detected objects; everything else is a constant. `not` negates a
body literal (negation as failure, stratified). `%` starts a comment.

A body atom whose predicate is neither built-in nor defined by any
clause denotes an empty derived predicate and always evaluates to 0;
negating such a predicate is rejected.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .predicates import (
    ATTRIBUTE_PREDICATES,
    BUILTIN_ARITY,
    COUNT_PREDICATE,
    SPATIAL_RELATIONS,
    is_builtin,
)

# Unconstrained clause-weight parameter; sigmoid(12) ~= 0.9999939,
# effectively weight 1 for pure reranking.
DEFAULT_WEIGHT_PARAM = 12.0

_NAME_RE = re.compile(r"[A-Za-z0-9_]+\Z")


class RuleError(Exception):
    """Base for rule parse/validation failures; carries a source position."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        if line:
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)


class RuleSyntaxError(RuleError):
    pass


class ArityError(RuleError):
    pass


class PredicateUsageError(RuleError):
    """Misuse of a built-in predicate (bad value slot, unknown relation, ...)."""


class UnsafeVariableError(RuleError):
    pass


class StratificationError(RuleError):
    pass


class UnknownQueryError(RuleError):
    pass


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Term:
    kind: str  # "variable" | "constant"
    name: str

    def __post_init__(self):
        if not self.name or not _NAME_RE.match(self.name):
            raise ValueError(f"bad term name {self.name!r}")
        if self.kind == "variable":
            if not self.name[0].isupper():
                raise ValueError(f"variable {self.name!r} must start uppercase")
        elif self.kind == "constant":
            if not (self.name[0].islower() or self.name[0].isdigit()):
                raise ValueError(
                    f"constant {self.name!r} must start with a lowercase letter or digit"
                )
        else:
            raise ValueError(f"bad term kind {self.kind!r}")

    @staticmethod
    def var(name: str) -> "Term":
        return Term("variable", name)

    @staticmethod
    def const(name) -> "Term":
        return Term("constant", str(name))

    @property
    def is_variable(self) -> bool:
        return self.kind == "variable"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[Term, ...] = ()

    def variables(self) -> list[str]:
        return [t.name for t in self.args if t.is_variable]

    def __str__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({', '.join(map(str, self.args))})"


@dataclass(frozen=True)
class Literal:
    atom: Atom
    negated: bool = False

    def __str__(self) -> str:
        return f"not {self.atom}" if self.negated else str(self.atom)


@dataclass(frozen=True)
class Clause:
    head: Atom
    body: tuple[Literal, ...] = ()
    weight_param: float = DEFAULT_WEIGHT_PARAM
    source_span: tuple[int, int] = (0, 0)

    def __str__(self) -> str:
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(map(str, self.body))}."


@dataclass(frozen=True)
class RuleProgram:
    clauses: tuple[Clause, ...]
    query: str
    # predicate -> stratum; built-ins and empty predicates sit at 0.
    strata: dict[str, int] = field(default_factory=dict, compare=False)

    def to_source(self) -> str:
        return "\n".join(str(c) for c in self.clauses) + "\n"

    def head_predicates(self) -> set[str]:
        return {c.head.predicate for c in self.clauses}


def format_atom(atom: Atom, binding: dict[str, str]) -> str:
    """Canonical `pred(arg1, arg2, ...)` text with variables bound to object ids."""
    parts = []
    for term in atom.args:
        if term.is_variable:
            if term.name not in binding:
                raise ValueError(f"unbound variable {term.name!r} in {atom}")
            parts.append(str(binding[term.name]))
        else:
            parts.append(term.name)
    if not parts:
        return atom.predicate
    return f"{atom.predicate}({', '.join(parts)})"


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT_RE = re.compile(r"[0-9]+")


@dataclass(frozen=True)
class _Token:
    kind: str  # IDENT INT LPAREN RPAREN COMMA IMPLIES PERIOD NOT EOF
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col, i = 1, 1, 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "%":
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch == "(":
            tokens.append(_Token("LPAREN", "(", line, col))
            i += 1
            col += 1
        elif ch == ")":
            tokens.append(_Token("RPAREN", ")", line, col))
            i += 1
            col += 1
        elif ch == ",":
            tokens.append(_Token("COMMA", ",", line, col))
            i += 1
            col += 1
        elif ch == ".":
            tokens.append(_Token("PERIOD", ".", line, col))
            i += 1
            col += 1
        elif ch == ":":
            if i + 1 < n and source[i + 1] == "-":
                tokens.append(_Token("IMPLIES", ":-", line, col))
                i += 2
                col += 2
            else:
                raise RuleSyntaxError("expected ':-'", start_line, start_col)
        else:
            m = _IDENT_RE.match(source, i)
            if m:
                text = m.group(0)
                kind = "NOT" if text == "not" else "IDENT"
                tokens.append(_Token(kind, text, line, col))
                i = m.end()
                col += len(text)
                continue
            m = _INT_RE.match(source, i)
            if m:
                text = m.group(0)
                tokens.append(_Token("INT", text, line, col))
                i = m.end()
                col += len(text)
                continue
            raise RuleSyntaxError(f"unexpected character {ch!r}", start_line, start_col)
    tokens.append(_Token("EOF", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            found = tok.text or "end of input"
            raise RuleSyntaxError(f"expected {what}, found {found!r}", tok.line, tok.col)
        return self.advance()

    def parse_term(self) -> Term:
        tok = self.peek()
        if tok.kind == "IDENT":
            self.advance()
            if tok.text[0] == "_":
                raise RuleSyntaxError(
                    f"term {tok.text!r} must start with a letter or digit", tok.line, tok.col
                )
            kind = "variable" if tok.text[0].isupper() else "constant"
            return Term(kind, tok.text)
        if tok.kind == "INT":
            self.advance()
            return Term("constant", tok.text)
        found = tok.text or "end of input"
        raise RuleSyntaxError(f"expected a term, found {found!r}", tok.line, tok.col)

    def parse_atom(self) -> Atom:
        tok = self.expect("IDENT", "a predicate name")
        if self.peek().kind != "LPAREN":
            return Atom(tok.text, ())
        self.advance()
        args = [self.parse_term()]
        while self.peek().kind == "COMMA":
            self.advance()
            args.append(self.parse_term())
        self.expect("RPAREN", "')' or ','")
        return Atom(tok.text, tuple(args))

    def parse_literal(self) -> Literal:
        if self.peek().kind == "NOT":
            self.advance()
            return Literal(self.parse_atom(), negated=True)
        return Literal(self.parse_atom(), negated=False)

    def parse_clause(self) -> Clause:
        start = self.peek()
        head = self.parse_atom()
        body: list[Literal] = []
        if self.peek().kind == "IMPLIES":
            self.advance()
            body.append(self.parse_literal())
            while self.peek().kind == "COMMA":
                self.advance()
                body.append(self.parse_literal())
        self.expect("PERIOD", "'.'")
        return Clause(head, tuple(body), source_span=(start.line, start.col))

    def parse_program(self) -> list[Clause]:
        clauses = []
        while self.peek().kind != "EOF":
            clauses.append(self.parse_clause())
        return clauses


# ---------------------------------------------------------------------------
# Static validation
# ---------------------------------------------------------------------------

def _check_builtin_usage(atom: Atom, span: tuple[int, int]) -> None:
    pred = atom.predicate
    expected = BUILTIN_ARITY[pred]
    if len(atom.args) != expected:
        raise ArityError(
            f"{pred} takes {expected} arguments, got {len(atom.args)} in {atom}", *span
        )
    if pred in ATTRIBUTE_PREDICATES:
        if atom.args[1].is_variable:
            raise PredicateUsageError(
                f"value slot of {atom} must be a constant (variables range over objects)",
                *span,
            )
    elif pred == "position":
        rel = atom.args[2]
        if rel.is_variable or rel.name not in SPATIAL_RELATIONS:
            raise PredicateUsageError(
                f"relation in {atom} must be one of {', '.join(SPATIAL_RELATIONS)}", *span
            )
    elif pred == COUNT_PREDICATE:
        family, value, k = atom.args
        if family.is_variable or family.name not in ATTRIBUTE_PREDICATES:
            raise PredicateUsageError(
                f"first argument of {atom} must be one of {', '.join(ATTRIBUTE_PREDICATES)}",
                *span,
            )
        if value.is_variable:
            raise PredicateUsageError(f"value slot of {atom} must be a constant", *span)
        if k.is_variable or not k.name.isdigit():
            raise PredicateUsageError(
                f"count in {atom} must be a nonnegative integer", *span
            )


def _check_arities(clauses: list[Clause]) -> dict[str, int]:
    """Fix each derived predicate's arity from its first occurrence."""
    arity: dict[str, int] = {}
    for clause in clauses:
        for atom in [clause.head] + [lit.atom for lit in clause.body]:
            pred = atom.predicate
            if is_builtin(pred):
                _check_builtin_usage(atom, clause.source_span)
            elif pred in arity:
                if len(atom.args) != arity[pred]:
                    raise ArityError(
                        f"{pred} used with {len(atom.args)} arguments, previously {arity[pred]}",
                        *clause.source_span,
                    )
            else:
                arity[pred] = len(atom.args)
    return arity


def _check_safety(clause: Clause) -> None:
    positive = set()
    for lit in clause.body:
        if not lit.negated:
            positive.update(lit.atom.variables())
    for lit in clause.body:
        if lit.negated:
            loose = set(lit.atom.variables()) - positive
            if loose:
                raise UnsafeVariableError(
                    f"variable {sorted(loose)[0]!r} of negated {lit.atom} "
                    "does not occur in a positive body literal",
                    *clause.source_span,
                )
    loose = set(clause.head.variables()) - positive
    if loose:
        raise UnsafeVariableError(
            f"head variable {sorted(loose)[0]!r} of {clause.head} "
            "does not occur in a positive body literal",
            *clause.source_span,
        )


def _check_stratification(clauses: list[Clause]) -> dict[str, int]:
    """Order-based negation check plus negative-cycle detection; returns strata."""
    heads: dict[str, int] = {}  # predicate -> index of its last defining clause
    for i, clause in enumerate(clauses):
        heads[clause.head.predicate] = max(heads.get(clause.head.predicate, -1), i)

    for i, clause in enumerate(clauses):
        for lit in clause.body:
            pred = lit.atom.predicate
            if lit.negated and not is_builtin(pred):
                if pred not in heads:
                    raise StratificationError(
                        f"negated predicate {pred!r} is never defined", *clause.source_span
                    )
                if heads[pred] >= i:
                    raise StratificationError(
                        f"negated predicate {pred!r} must be fully defined "
                        "before it is negated",
                        *clause.source_span,
                    )

    # Dependency edges between derived predicates; negative edges must not
    # sit inside a strongly connected component.
    preds = sorted(heads)
    edges: dict[str, set[tuple[str, bool]]] = {p: set() for p in preds}
    for clause in clauses:
        for lit in clause.body:
            dep = lit.atom.predicate
            if not is_builtin(dep) and dep in heads:
                edges[clause.head.predicate].add((dep, lit.negated))

    component = _tarjan_scc(preds, edges)
    for head, deps in edges.items():
        for dep, negated in deps:
            if negated and component[head] == component[dep]:
                raise StratificationError(
                    f"negation of {dep!r} participates in a dependency cycle"
                )

    strata = {p: 1 for p in preds}
    for _ in range(len(preds) + 1):
        changed = False
        for clause in clauses:
            head = clause.head.predicate
            for lit in clause.body:
                dep = lit.atom.predicate
                if is_builtin(dep) or dep not in strata:
                    continue
                floor = strata[dep] + 1 if lit.negated else strata[dep]
                if strata[head] < floor:
                    strata[head] = floor
                    changed = True
        if not changed:
            break
    else:
        raise StratificationError("program is not stratifiable")
    return strata


def _tarjan_scc(nodes: list[str], edges: dict[str, set[tuple[str, bool]]]) -> dict[str, int]:
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    component: dict[str, int] = {}
    counter = [0]
    n_comp = [0]

    def visit(v: str) -> None:
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        for w, _neg in sorted(edges[v]):
            if w not in index:
                visit(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            while True:
                w = stack.pop()
                on_stack.discard(w)
                component[w] = n_comp[0]
                if w == v:
                    break
            n_comp[0] += 1

    for v in nodes:
        if v not in index:
            visit(v)
    return component


def parse_program(source: str, query: str | None = None) -> RuleProgram:
    """Parse and validate a rule program.

    `query` names the predicate whose value is the program's answer; it
    defaults to the head of the first clause. Raises a RuleError subclass
    (with source position) on any syntax or validation failure.
    """
    clauses = _Parser(_tokenize(source)).parse_program()
    if not clauses:
        raise RuleSyntaxError("empty program")

    for clause in clauses:
        if is_builtin(clause.head.predicate):
            raise PredicateUsageError(
                f"cannot define built-in predicate {clause.head.predicate!r}",
                *clause.source_span,
            )
        if not clause.body and clause.head.variables():
            raise UnsafeVariableError(
                f"fact {clause.head} must be ground", *clause.source_span
            )

    _check_arities(clauses)
    for clause in clauses:
        _check_safety(clause)
    strata = _check_stratification(clauses)

    if query is None:
        query = clauses[0].head.predicate
    if query not in {c.head.predicate for c in clauses}:
        raise UnknownQueryError(f"query predicate {query!r} is not the head of any clause")

    return RuleProgram(tuple(clauses), query, strata)


def load_program(path: str, query: str | None = None) -> RuleProgram:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_program(fh.read(), query=query)
