"""Seeded random generation of fact types, canonical rules, and fact sets."""
from __future__ import annotations

import random

import oracle
from rulemesh import ir
from rulemesh.ir import AssertAction, Const, Fact, FactType, Guard, Pattern, RuleIR, Var

STRINGS = ["a", "b", "c", "ann", "bob", 'qu"ote', "back\\slash"]
INTS = list(range(-3, 26))


def rand_const(rng: random.Random, kind: str) -> Const:
    if kind == "string":
        return Const(rng.choice(STRINGS))
    if kind == "integer":
        return Const(rng.choice(INTS))
    return Const(rng.choice([True, False]))


def gen_types(rng: random.Random, max_types: int = 3) -> list[FactType]:
    types = []
    for t in range(rng.randint(1, max_types)):
        slots = tuple(
            (f"s{i}", rng.choice(ir.KINDS)) for i in range(rng.randint(1, 3))
        )
        types.append(FactType(f"T{t}", slots))
    return types


def gen_rule(
    rng: random.Random,
    types: list[FactType],
    name: str,
    max_patterns: int = 3,
    max_guards: int = 3,
    max_actions: int = 2,
) -> RuleIR:
    """A canonical, checked rule within the given bounds.

    Patterns always constrain at least one slot, so the result is printable
    in both dialects.
    """
    var_kinds: dict[str, str] = {}

    def fresh_or_reuse(kind: str) -> Var:
        candidates = [n for n, k in var_kinds.items() if k == kind]
        if candidates and rng.random() < 0.3:
            return Var(rng.choice(candidates))
        name = f"x{len(var_kinds)}"
        var_kinds[name] = kind
        return Var(name)

    patterns = []
    for _ in range(rng.randint(1, max_patterns)):
        ftype = rng.choice(types)
        chosen = rng.sample(ftype.slots, rng.randint(1, len(ftype.slots)))
        slot_eq: dict[str, Const] = {}
        slot_bind: dict[str, Var] = {}
        for slot, kind in chosen:
            if rng.random() < 0.35:
                slot_eq[slot] = rand_const(rng, kind)
            else:
                slot_bind[slot] = fresh_or_reuse(kind)
        patterns.append(Pattern(ftype.name, slot_eq, slot_bind))

    guards = []
    bound = list(var_kinds)
    for _ in range(rng.randint(0, max_guards)):
        if not bound:
            break
        lhs = rng.choice(bound)
        kind = var_kinds[lhs]
        op = rng.choice(ir.OPS) if kind == "integer" else rng.choice(("==", "!="))
        same_kind = [n for n in bound if var_kinds[n] == kind]
        if same_kind and rng.random() < 0.25:
            rhs: Const | Var = Var(rng.choice(same_kind))
        else:
            rhs = rand_const(rng, kind)
        guards.append(Guard(Var(lhs), op, rhs))

    actions = []
    for _ in range(rng.randint(1, max_actions)):
        ftype = rng.choice(types)
        values: dict[str, Const | Var] = {}
        for slot, kind in ftype.slots:
            usable = [n for n in bound if var_kinds[n] == kind]
            if usable and rng.random() < 0.5:
                values[slot] = Var(rng.choice(usable))
            else:
                values[slot] = rand_const(rng, kind)
        actions.append(AssertAction(ftype.name, values))

    rule = ir.canonicalize(RuleIR(name, tuple(patterns), tuple(guards), tuple(actions)))
    assert ir.check(rule, types) == []
    return rule


def gen_facts(rng: random.Random, types: list[FactType], max_facts: int = 20) -> set[Fact]:
    facts = set()
    for _ in range(rng.randint(0, max_facts)):
        ftype = rng.choice(types)
        facts.add(
            Fact(ftype.name, {slot: rand_const(rng, kind) for slot, kind in ftype.slots})
        )
    return facts


def gen_instance(rng: random.Random, max_rules: int = 5, max_facts: int = 20):
    types = gen_types(rng)
    rules = [gen_rule(rng, types, f"r{i}") for i in range(rng.randint(1, max_rules))]
    facts = gen_facts(rng, types, max_facts)
    return types, rules, facts


def gen_executable_instance(
    rng: random.Random,
    max_rules: int = 5,
    max_facts: int = 20,
    closure_cap: int = 24,
):
    """An instance whose brute-force closure stays desk-scale.

    Rules can legally describe huge (though finite) closures; those are
    correct but useless for a cross-checked oracle run, so oversized draws
    are rejected and redrawn.
    """
    while True:
        types, rules, facts = gen_instance(rng, max_rules, max_facts)
        try:
            expected = oracle.closure(rules, facts, size_cap=closure_cap)
        except oracle.ClosureTooLarge:
            continue
        return types, rules, facts, expected
