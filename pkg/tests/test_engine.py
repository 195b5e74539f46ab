from __future__ import annotations

import random
import threading

import pytest

from conftest import ADULT_RULE_DRL, PERSON_ADULT_DRL
from genrules import gen_executable_instance, gen_rule, gen_types
from rulemesh import dialect_drl as drl
from rulemesh import ir
from rulemesh.engine import RuleEngine, naive_match
from rulemesh.ir import Const, Fact, RuleMeshError, Var

EDGE_PATH_DECLS = (
    "declare Edge\n src: string\n dst: string\nend\n"
    "declare Path\n src: string\n dst: string\nend\n"
)

EDGE_RULE = (
    'rule "base"\nwhen\n  Edge(src : $a, dst : $b)\nthen\n'
    "  insert Path(src: $a, dst: $b);\nend"
)

STEP_RULE = (
    'rule "step"\nwhen\n  Path(src : $a, dst : $b)\n  Edge(src : $b, dst : $c)\nthen\n'
    "  insert Path(src: $a, dst: $c);\nend"
)


def person(name: str, age: int) -> Fact:
    return Fact("Person", {"name": Const(name), "age": Const(age)})


@pytest.fixture
def demo_ks():
    engine = RuleEngine("drl-mini")
    return engine.create_knowledge_set("demo", PERSON_ADULT_DRL)


def test_create_knowledge_set(demo_ks):
    assert list(demo_ks.types) == ["Person", "Adult"]
    assert demo_ks.facts == set()
    assert demo_ks.rules == []


def test_create_duplicate_name_fails():
    engine = RuleEngine("drl-mini")
    engine.create_knowledge_set("demo")
    with pytest.raises(RuleMeshError) as err:
        engine.create_knowledge_set("demo")
    assert err.value.code == ir.E_EXISTS


def test_create_with_malformed_declarations_fails():
    engine = RuleEngine("drl-mini")
    with pytest.raises(RuleMeshError) as err:
        engine.create_knowledge_set("bad", "declare Person\n age: float\nend")
    assert err.value.code == ir.E_GRAMMAR
    assert engine.knowledge_set_names() == []


def test_assert_fact_set_semantics(demo_ks):
    assert demo_ks.assert_fact(person("ann", 20)) is True
    assert demo_ks.assert_fact(person("ann", 20)) is False
    assert demo_ks.retract_fact(person("bob", 1)) is False
    assert demo_ks.retract_fact(person("ann", 20)) is True
    assert demo_ks.facts == set()


def test_assert_fact_kind_mismatch(demo_ks):
    bad = Fact("Person", {"name": Const("ann"), "age": Const("old")})
    with pytest.raises(RuleMeshError) as err:
        demo_ks.assert_fact(bad)
    assert err.value.code == ir.E_KIND_MISMATCH


def test_assert_fact_unknown_type(demo_ks):
    with pytest.raises(RuleMeshError) as err:
        demo_ks.assert_fact(Fact("Ghost", {"x": Const(1)}))
    assert err.value.code == ir.E_UNKNOWN_TYPE


def test_assert_fact_missing_and_unknown_slots(demo_ks):
    with pytest.raises(RuleMeshError) as err:
        demo_ks.assert_fact(Fact("Person", {"name": Const("ann")}))
    assert err.value.code == ir.E_KIND_MISMATCH
    with pytest.raises(RuleMeshError) as err:
        demo_ks.assert_fact(
            Fact("Person", {"name": Const("a"), "age": Const(1), "pet": Const("cat")})
        )
    assert err.value.code == ir.E_UNKNOWN_SLOT


def test_add_rule_and_rollback(demo_ks):
    verdict = demo_ks.add_rule(ADULT_RULE_DRL)
    assert verdict.status == "valid" and verdict.rule == "adult"
    assert [e.name for e in demo_ks.rules] == ["adult"]
    # invalid rule leaves the knowledge set unchanged
    snap = demo_ks.snapshot()
    bad = 'rule "bad"\nwhen\n  Ghost(x == 1)\nthen\n  insert Adult(name: "x");\nend'
    verdict = demo_ks.add_rule(bad)
    assert verdict.status == "invalid"
    assert [d.code for d in verdict.diagnostics] == [ir.E_UNKNOWN_TYPE]
    assert demo_ks.snapshot() == snap


def test_add_rule_duplicate_name(demo_ks):
    assert demo_ks.add_rule(ADULT_RULE_DRL).status == "valid"
    verdict = demo_ks.add_rule(ADULT_RULE_DRL)
    assert verdict.status == "invalid"
    assert [d.code for d in verdict.diagnostics] == [ir.E_DUPLICATE_RULE]


def test_remove_rule(demo_ks):
    demo_ks.add_rule(ADULT_RULE_DRL)
    assert demo_ks.remove_rule("adult") is True
    assert demo_ks.remove_rule("adult") is False
    assert demo_ks.rules == []


def test_match_adult_rule(demo_ks):
    demo_ks.assert_fact(person("ann", 20))
    demo_ks.assert_fact(person("bob", 15))
    rules, _ = drl.parse_rules(ADULT_RULE_DRL, demo_ks.type_list)
    bindings = demo_ks.match(rules[0])
    assert len(bindings) == 1
    (env,) = bindings
    assert env["n"] == Const("ann")
    age_var = rules[0].patterns[0].slot_bind["age"].name
    assert env[age_var] == Const(20)


def test_match_empty_memory(demo_ks):
    rules, _ = drl.parse_rules(ADULT_RULE_DRL, demo_ks.type_list)
    assert demo_ks.match(rules[0]) == []


def test_match_repeated_pattern_cross_product(demo_ks):
    demo_ks.assert_fact(person("ann", 20))
    demo_ks.assert_fact(person("bob", 21))
    text = (
        'rule "pairs"\nwhen\n  Person(name : $a, age >= 0)\n  Person(name : $b, age >= 0)\n'
        "then\n  insert Adult(name: $a);\nend"
    )
    rules, diags = drl.parse_rules(text, demo_ks.type_list)
    assert diags == []
    assert len(demo_ks.match(rules[0])) == 4


def test_match_deterministic_order(demo_ks):
    for name, age in [("zed", 30), ("ann", 20), ("mia", 40)]:
        demo_ks.assert_fact(person(name, age))
    rules, _ = drl.parse_rules(ADULT_RULE_DRL, demo_ks.type_list)
    names = [env["n"].value for env in demo_ks.match(rules[0])]
    # canonical fact order compares slots name-sorted, so age orders Person facts
    assert names == ["ann", "zed", "mia"]


def test_run_adult_scenario(demo_ks):
    demo_ks.add_rule(ADULT_RULE_DRL)
    demo_ks.assert_fact(person("ann", 20))
    demo_ks.assert_fact(person("bob", 15))
    report = demo_ks.run()
    assert report.firings == 1
    assert report.new_facts == [Fact("Adult", {"name": Const("ann")})]
    assert report.diverged is False
    second = demo_ks.run()
    assert second.firings == 0
    assert second.new_facts == []


def test_run_transitive_closure_fixture():
    engine = RuleEngine("drl-mini")
    ks = engine.create_knowledge_set("tc", EDGE_PATH_DECLS)
    assert ks.add_rule(EDGE_RULE).status == "valid"
    assert ks.add_rule(STEP_RULE).status == "valid"
    for s, d in [("a", "b"), ("b", "c"), ("c", "d")]:
        ks.assert_fact(Fact("Edge", {"src": Const(s), "dst": Const(d)}))
    report = ks.run()
    paths = {
        (f.values["src"].value, f.values["dst"].value)
        for f in ks.facts
        if f.type_name == "Path"
    }
    assert paths == {
        ("a", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d"), ("c", "d")
    }
    assert len(paths) == 6
    assert report.firings == 6


def test_retraction_clears_refraction(demo_ks):
    demo_ks.add_rule(ADULT_RULE_DRL)
    demo_ks.assert_fact(person("ann", 20))
    assert demo_ks.run().firings == 1
    demo_ks.retract_fact(person("ann", 20))
    demo_ks.retract_fact(Fact("Adult", {"name": Const("ann")}))
    demo_ks.assert_fact(person("ann", 20))
    report = demo_ks.run()
    assert report.firings == 1  # refraction entry was invalidated by the retract
    assert report.new_facts == [Fact("Adult", {"name": Const("ann")})]


def test_remove_rule_clears_refraction(demo_ks):
    demo_ks.add_rule(ADULT_RULE_DRL)
    demo_ks.assert_fact(person("ann", 20))
    demo_ks.run()
    demo_ks.remove_rule("adult")
    assert demo_ks.refraction == set()


def test_validate_verdicts_and_purity(demo_ks):
    demo_ks.add_rule(ADULT_RULE_DRL)
    demo_ks.assert_fact(person("ann", 20))
    snap = demo_ks.snapshot()
    text = "\n".join(
        [
            ADULT_RULE_DRL.replace('"adult"', '"other"'),
            'rule "bad"\nwhen\n  Ghost(x == 1)\nthen\n  insert Adult(name: "x");\nend',
            'rule "broken"\nwhen\nthen\nend',
        ]
    )
    verdicts = demo_ks.validate(text)
    assert [(v.rule, v.status) for v in verdicts] == [
        ("other", "valid"),
        ("bad", "invalid"),
        ("broken", "invalid"),
    ]
    assert demo_ks.snapshot() == snap


def test_validate_duplicate_of_installed_rule(demo_ks):
    demo_ks.add_rule(ADULT_RULE_DRL)
    snap = demo_ks.snapshot()
    verdicts = demo_ks.validate(ADULT_RULE_DRL)
    assert [d.code for d in verdicts[0].diagnostics] == [ir.E_DUPLICATE_RULE]
    assert demo_ks.snapshot() == snap


def test_validate_broken_text(demo_ks):
    snap = demo_ks.snapshot()
    verdicts = demo_ks.validate('rule "unterminated')
    assert len(verdicts) == 1
    assert verdicts[0].status == "invalid"
    assert any(d.code == ir.E_GRAMMAR for d in verdicts[0].diagnostics)
    assert demo_ks.snapshot() == snap


def test_divergence_guard(demo_ks):
    demo_ks.add_rule(ADULT_RULE_DRL)
    for i in range(30):
        demo_ks.assert_fact(person(f"p{i}", 20 + i))
    with pytest.raises(RuleMeshError) as err:
        demo_ks.run(max_firings=5)
    assert err.value.code == ir.E_DIVERGED


def test_run_against_oracle_random_instances():
    rng = random.Random(1234)
    for i in range(60):
        types, rules, facts, expected = gen_executable_instance(rng, max_facts=15)
        engine = RuleEngine("drl-mini")
        ks = engine.create_knowledge_set("g", drl.print_declarations(types))
        for rule in rules:
            verdict = ks.add_rule(drl.print_rule(rule))
            assert verdict.status == "valid", verdict
        for fact in facts:
            ks.assert_fact(fact)
        ks.run()
        assert set(ks.facts) == expected, f"instance {i}"


def test_confluence_under_rule_permutations():
    rng = random.Random(777)
    for _ in range(12):
        types, rules, facts, expected = gen_executable_instance(rng, max_rules=4, max_facts=10)
        for _ in range(4):
            order = rules[:]
            rng.shuffle(order)
            engine = RuleEngine("drl-mini")
            ks = engine.create_knowledge_set("g", drl.print_declarations(types))
            for rule in order:
                assert ks.add_rule(drl.print_rule(rule)).status == "valid"
            for fact in facts:
                ks.assert_fact(fact)
            ks.run()
            assert set(ks.facts) == expected


def test_run_determinism():
    rng = random.Random(31)
    types, rules, facts, _ = gen_executable_instance(rng, max_rules=4, max_facts=12)

    def execute():
        engine = RuleEngine("drl-mini")
        ks = engine.create_knowledge_set("g", drl.print_declarations(types))
        for rule in rules:
            assert ks.add_rule(drl.print_rule(rule)).status == "valid"
        for fact in sorted(facts, key=Fact.sort_key):
            ks.assert_fact(fact)
        report = ks.run()
        return report.firings, report.iterations, report.new_facts, ks.snapshot()

    assert execute() == execute()


def test_knowledge_set_listing_sorted():
    engine = RuleEngine("drl-mini")
    for name in ["b", "a", "c"]:
        engine.create_knowledge_set(name)
    assert engine.knowledge_set_names() == ["a", "b", "c"]
    assert engine.delete_knowledge_set("b") is True
    assert engine.delete_knowledge_set("b") is False
    assert engine.knowledge_set_names() == ["a", "c"]


def test_get_unknown_knowledge_set():
    engine = RuleEngine("drl-mini")
    with pytest.raises(RuleMeshError) as err:
        engine.get("nope")
    assert err.value.code == ir.E_NOT_FOUND


def test_run_with_no_rules_is_a_quiet_sweep(demo_ks):
    report = demo_ks.run()
    assert (report.firings, report.iterations, report.new_facts) == (0, 1, [])
    assert report.diverged is False


def test_matcher_is_a_replaceable_strategy():
    calls = []

    def spy_matcher(ks, rule):
        calls.append(rule.name)
        return naive_match(ks, rule)

    engine = RuleEngine("drl-mini", matcher=spy_matcher)
    ks = engine.create_knowledge_set("demo", PERSON_ADULT_DRL)
    ks.add_rule(ADULT_RULE_DRL)
    ks.assert_fact(person("ann", 20))
    report = ks.run()
    assert report.firings == 1
    assert "adult" in calls


def test_distinct_knowledge_sets_operate_concurrently():
    engine = RuleEngine("drl-mini")
    names = [f"ks{i}" for i in range(4)]
    for name in names:
        ks = engine.create_knowledge_set(name, PERSON_ADULT_DRL)
        ks.add_rule(ADULT_RULE_DRL)
    errors = []

    def work(name: str) -> None:
        try:
            ks = engine.get(name)
            for i in range(25):
                ks.assert_fact(person(f"p{i}", 18 + i))
                ks.run()
            ks.validate(ADULT_RULE_DRL.replace('"adult"', '"probe"'))
        except Exception as e:  # noqa: BLE001 - collected for the assertion
            errors.append(e)

    threads = [threading.Thread(target=work, args=(name,)) for name in names]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == []
    for name in names:
        ks = engine.get(name)
        adults = {f for f in ks.facts if f.type_name == "Adult"}
        assert len(adults) == 25


def test_single_knowledge_set_mutations_are_serialized():
    engine = RuleEngine("drl-mini")
    ks = engine.create_knowledge_set("demo", PERSON_ADULT_DRL)
    ks.add_rule(ADULT_RULE_DRL)
    errors = []

    def work(base: int) -> None:
        try:
            for i in range(20):
                ks.assert_fact(person(f"p{base}-{i}", 20))
                ks.run()
        except Exception as e:  # noqa: BLE001
            errors.append(e)

    threads = [threading.Thread(target=work, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == []
    adults = {f for f in ks.facts if f.type_name == "Adult"}
    assert len(adults) == 80


def test_clips_engine_end_to_end():
    engine = RuleEngine("clips-mini")
    ks = engine.create_knowledge_set(
        "demo",
        "(deftemplate Person (slot name (type STRING)) (slot age (type INTEGER)))\n"
        "(deftemplate Adult (slot name (type STRING)))",
    )
    verdict = ks.add_rule(
        "(defrule adult (Person (age ?g) (name ?n)) (test (>= ?g 18))"
        " => (assert (Adult (name ?n))))"
    )
    assert verdict.status == "valid"
    ks.assert_fact(person("ann", 20))
    report = ks.run()
    assert report.new_facts == [Fact("Adult", {"name": Const("ann")})]
