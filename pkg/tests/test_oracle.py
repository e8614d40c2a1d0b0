import numpy as np
import pytest

from helpers import random_program, random_scene, random_table
from logicrank.oracle import (
    CrispScene,
    crisp_eval,
    enumerate_count,
    recursive_fuzzy_eval,
    recursive_fuzzy_valuation,
)
from logicrank.reasoner import ClauseWeights, ground, infer
from logicrank.rules import parse_program
from logicrank.scene import (
    DetectedObject,
    GroundAtom,
    GroundAtomTable,
    SceneRecord,
    ValuationConfig,
    build_atom_table,
)

FIG_RULE = (
    "kp :- shape(O1,sphere), color(O1,blue), shape(O2,cube), "
    "color(O2,red), position(O1,O2,above)."
)
CFG = ValuationConfig()


def crisp_two_objects(top=("sphere", "blue"), bottom=("cube", "red")):
    labels = {
        "obj1": {"shape": top[0], "color": top[1]},
        "obj2": {"shape": bottom[0], "color": bottom[1]},
    }
    centers = {"obj1": (0.5, 0.2), "obj2": (0.5, 0.8)}
    return CrispScene.from_labels(labels, centers)


class TestCrispEval:
    def test_satisfied(self):
        program = parse_program(FIG_RULE, query="kp")
        assert crisp_eval(crisp_two_objects(), program) is True

    def test_colors_swapped(self):
        program = parse_program(FIG_RULE, query="kp")
        scene = crisp_two_objects(top=("sphere", "red"), bottom=("cube", "blue"))
        assert crisp_eval(scene, program) is False

    def test_exact_count_rule(self):
        program = parse_program(
            "kp :- at_least(class, dog, 2), not at_least(class, dog, 3)."
        )
        two = CrispScene.from_labels(
            {"obj1": {"class": "dog"}, "obj2": {"class": "dog"}, "obj3": {"class": "cat"}},
            {"obj1": (0.1, 0.1), "obj2": (0.5, 0.5), "obj3": (0.9, 0.9)},
        )
        three = CrispScene.from_labels(
            {f"obj{i}": {"class": "dog"} for i in (1, 2, 3)},
            {"obj1": (0.1, 0.1), "obj2": (0.5, 0.5), "obj3": (0.9, 0.9)},
        )
        assert crisp_eval(two, program) is True
        assert crisp_eval(three, program) is False

    def test_from_scene_thresholds(self):
        obj = DetectedObject(
            "obj1", (0.5, 0.5, 0.2, 0.2), shape_dist={"cube": 0.58, "sphere": 0.4}
        )
        scene = CrispScene.from_scene(SceneRecord("t", (obj,)))
        assert scene.labels["obj1"]["shape"] == "cube"
        assert "color" not in scene.labels["obj1"]

    def test_derived_helper_predicates(self):
        source = (
            "blue_sphere(X) :- shape(X, sphere), color(X, blue).\n"
            "kp :- blue_sphere(O), not at_least(color, red, 1).\n"
        )
        program = parse_program(source, query="kp")
        yes = CrispScene.from_labels(
            {"obj1": {"shape": "sphere", "color": "blue"}}, {"obj1": (0.5, 0.5)}
        )
        no = CrispScene.from_labels(
            {
                "obj1": {"shape": "sphere", "color": "blue"},
                "obj2": {"shape": "cube", "color": "red"},
            },
            {"obj1": (0.2, 0.2), "obj2": (0.8, 0.8)},
        )
        assert crisp_eval(yes, program) is True
        assert crisp_eval(no, program) is False


class TestRecursiveFuzzy:
    def test_single_clause_product(self):
        program = parse_program("kp :- color(O, c0), color(O, c1).", query="kp")
        obj = DetectedObject("obj1", (0.5, 0.5, 0.2, 0.2), color_dist={"c0": 0.9, "c1": 0.05})
        scene = SceneRecord("p", (obj,))
        table = build_atom_table(scene, program, CFG)
        values = table.values.copy()
        values[table.index[GroundAtom("color", ("obj1", "c1"))]] = 0.5
        table = GroundAtomTable(table.atoms, values)
        grounding = ground(program, scene)
        assert recursive_fuzzy_eval(table, grounding, ClauseWeights.exact_ones(1)) == pytest.approx(0.45)

    def test_chained_rules(self):
        source = "r :- color(O, c0).\nq :- r.\n"
        program = parse_program(source, query="q")
        obj = DetectedObject("obj1", (0.5, 0.5, 0.2, 0.2), color_dist={"c0": 0.7})
        scene = SceneRecord("c", (obj,))
        table = build_atom_table(scene, program, CFG)
        grounding = ground(program, scene)
        assert recursive_fuzzy_eval(table, grounding, ClauseWeights.exact_ones(2)) == pytest.approx(0.7)

    def test_cycle_detected(self):
        # positive cycle is legal for the engine but out of the oracle's scope
        source = "p :- q.\nq :- p.\nq :- color(O, c0).\n"
        program = parse_program(source, query="q")
        obj = DetectedObject("obj1", (0.5, 0.5, 0.2, 0.2), color_dist={"c0": 0.7})
        scene = SceneRecord("cy", (obj,))
        table = build_atom_table(scene, program, CFG)
        grounding = ground(program, scene)
        with pytest.raises(ValueError):
            recursive_fuzzy_valuation(table, grounding, ClauseWeights.exact_ones(3))

    def test_agreement_with_engine(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            program = random_program(rng)
            scene = random_scene(rng)
            table = random_table(rng, build_atom_table(scene, program, CFG))
            grounding = ground(program, scene)
            weights = ClauseWeights.uniform(len(program.clauses), float(rng.uniform(0, 4)))
            engine = infer(table, grounding, weights)
            say = recursive_fuzzy_valuation(table, grounding, weights)
            np.testing.assert_allclose(engine.valuation, say, atol=1e-9)


class TestEnumerateCount:
    def test_half_half(self):
        assert enumerate_count([0.5, 0.5], 1) == pytest.approx(0.75, abs=1e-15)

    def test_single_trial(self):
        assert enumerate_count([0.37], 1) == pytest.approx(0.37, abs=1e-15)

    def test_three_trials(self):
        assert enumerate_count([0.9, 0.8, 0.1], 2) == pytest.approx(0.746, abs=1e-12)

    def test_k_zero(self):
        assert enumerate_count([], 0) == 1.0

    def test_cap(self):
        with pytest.raises(ValueError):
            enumerate_count([0.5] * 21, 1)
