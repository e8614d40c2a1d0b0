import pytest

from logicrank.rules import (
    ArityError,
    Atom,
    PredicateUsageError,
    RuleSyntaxError,
    StratificationError,
    Term,
    UnknownQueryError,
    UnsafeVariableError,
    format_atom,
    parse_program,
)

FIG_RULE = (
    "kp :- shape(O1,sphere), color(O1,blue), shape(O2,cube), "
    "color(O2,red), position(O1,O2,above)."
)


class TestParsing:
    def test_five_literal_rule(self):
        program = parse_program(FIG_RULE, query="kp")
        assert len(program.clauses) == 1
        clause = program.clauses[0]
        assert len(clause.body) == 5
        assert not any(lit.negated for lit in clause.body)
        assert program.query == "kp"

    def test_minimal_program(self):
        program = parse_program("kp :- shape(O1,sphere).", query="kp")
        assert len(program.clauses) == 1
        assert len(program.clauses[0].body) == 1
        assert not program.clauses[0].body[0].negated

    def test_comments_and_whitespace(self):
        source = "% heading\nkp :- shape(O1, sphere). % trailing\n\n"
        program = parse_program(source)
        assert len(program.clauses) == 1

    def test_ground_fact(self):
        program = parse_program("flag.\nkp :- shape(O, cube), flag.", query="kp")
        assert program.clauses[0].body == ()

    def test_negation_and_integers(self):
        source = (
            "kp :- at_least(class, dog, 2), not at_least(class, dog, 3)."
        )
        program = parse_program(source, query="kp")
        assert program.clauses[0].body[1].negated

    def test_default_query_is_first_head(self):
        assert parse_program("kp :- shape(O, cube).").query == "kp"

    def test_source_order_preserved(self):
        program = parse_program("a :- shape(O, cube).\nb :- a.", query="b")
        assert [c.head.predicate for c in program.clauses] == ["a", "b"]


class TestParseErrors:
    def test_empty_argument(self):
        with pytest.raises(RuleSyntaxError):
            parse_program("kp :- shape(O1,).")

    def test_missing_period(self):
        with pytest.raises(RuleSyntaxError):
            parse_program("kp :- shape(O1, sphere)")

    def test_error_carries_position(self):
        with pytest.raises(RuleSyntaxError) as err:
            parse_program("kp :- shape(O1,\n).")
        assert err.value.line == 2

    def test_arity_mismatch_builtin(self):
        with pytest.raises(ArityError):
            parse_program("kp :- shape(O1).")

    def test_arity_mismatch_derived(self):
        with pytest.raises(ArityError):
            parse_program("a(X) :- shape(X, cube).\nkp :- a.", query="kp")

    def test_unsafe_head_variable(self):
        with pytest.raises(UnsafeVariableError):
            parse_program("kp(X) :- not shape(X, cube).")

    def test_non_ground_fact(self):
        with pytest.raises(UnsafeVariableError):
            parse_program("kp(X).")

    def test_self_negation_rejected(self):
        with pytest.raises(StratificationError):
            parse_program("p :- not p.")

    def test_negative_cycle_rejected(self):
        source = "q :- p.\np :- not q.\n"
        with pytest.raises(StratificationError):
            parse_program(source, query="p")

    def test_forward_negation_rejected(self):
        source = "p :- not q.\nq :- shape(O, cube).\n"
        with pytest.raises(StratificationError):
            parse_program(source, query="p")

    def test_unknown_query(self):
        with pytest.raises(UnknownQueryError):
            parse_program("kp :- shape(O, cube).", query="nope")

    def test_builtin_head_rejected(self):
        with pytest.raises(PredicateUsageError):
            parse_program("shape(X, cube) :- color(X, red).")

    def test_variable_value_slot_rejected(self):
        with pytest.raises(PredicateUsageError):
            parse_program("kp :- shape(O, What).")

    def test_unknown_relation_rejected(self):
        with pytest.raises(PredicateUsageError):
            parse_program("kp :- position(A, B, behind), shape(A, cube), shape(B, cube).")

    def test_bad_at_least_family(self):
        with pytest.raises(PredicateUsageError):
            parse_program("kp :- at_least(weight, heavy, 2).")


def _structure(program):
    return [(c.head, c.body) for c in program.clauses]


class TestRoundTrip:
    @pytest.mark.parametrize(
        "source",
        [
            FIG_RULE,
            "kp :- at_least(class, dog, 2), not at_least(class, dog, 3).",
            "kp :- position(A, B, left), shape(A, cube), shape(B, sphere).",
        ],
    )
    def test_print_parse_fixpoint(self, source):
        first = parse_program(source, query="kp")
        second = parse_program(first.to_source(), query="kp")
        assert _structure(first) == _structure(second)
        assert second.to_source() == first.to_source()

    def test_multi_clause_round_trip(self):
        source = (
            "helper(X) :- shape(X, sphere), color(X, blue).\n"
            "kp :- helper(O1), not at_least(color, red, 3).\n"
        )
        first = parse_program(source, query="kp")
        second = parse_program(first.to_source(), query="kp")
        assert _structure(first) == _structure(second)
        assert second.to_source() == first.to_source()

    def test_determinism(self):
        a = parse_program(FIG_RULE, query="kp")
        b = parse_program(FIG_RULE, query="kp")
        assert a.clauses == b.clauses
        assert a.strata == b.strata


class TestFormatAtom:
    def test_bound_attribute(self):
        atom = Atom("shape", (Term.var("O1"), Term.const("sphere")))
        assert format_atom(atom, {"O1": "obj1"}) == "shape(obj1, sphere)"

    def test_bound_position(self):
        atom = Atom(
            "position", (Term.var("O1"), Term.var("O2"), Term.const("above"))
        )
        assert format_atom(atom, {"O1": "obj1", "O2": "obj2"}) == "position(obj1, obj2, above)"

    def test_unbound_variable(self):
        atom = Atom("color", (Term.var("O1"), Term.const("blue")))
        with pytest.raises(ValueError):
            format_atom(atom, {})

    def test_zero_arity(self):
        assert format_atom(Atom("kp", ()), {}) == "kp"


class TestTerms:
    def test_variable_must_be_uppercase(self):
        with pytest.raises(ValueError):
            Term("variable", "lower")

    def test_constant_must_be_lowercase_or_digit(self):
        with pytest.raises(ValueError):
            Term("constant", "Upper")
        assert Term.const("2").name == "2"

    def test_name_charset(self):
        with pytest.raises(ValueError):
            Term.const("sp ace")
        with pytest.raises(ValueError):
            Term.const("")
