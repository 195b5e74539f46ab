"""Deterministic forward-chaining over the pivot IR.

A knowledge set owns fact types, a working memory with set semantics, rules
kept with their verbatim source text, and refraction state so an
instantiation fires at most once.  Matching is a naive nested-loop join by
design; ``RuleEngine`` accepts a replacement matcher for callers that need
a faster strategy.
"""
from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field

from . import dialect_clips, dialect_drl, ir
from .ir import (
    Const,
    Diagnostic,
    Fact,
    FactType,
    RuleIR,
    RuleMeshError,
    Var,
    sorted_facts,
)

DIALECTS = {
    dialect_drl.DIALECT_ID: dialect_drl,
    dialect_clips.DIALECT_ID: dialect_clips,
}


def dialect_module(dialect: str):
    try:
        return DIALECTS[dialect]
    except KeyError:
        raise RuleMeshError(ir.E_BAD_REQUEST, f"unknown dialect {dialect!r}") from None


@dataclass
class RuleEntry:
    name: str
    text: str
    rule: RuleIR


@dataclass(frozen=True)
class Verdict:
    """Outcome of one rule's trial registration; valid means no diagnostics."""

    rule: str | int
    status: str
    diagnostics: tuple[Diagnostic, ...] = ()

    @staticmethod
    def valid(rule: str | int) -> "Verdict":
        return Verdict(rule, "valid")

    @staticmethod
    def invalid(rule: str | int, diagnostics) -> "Verdict":
        return Verdict(rule, "invalid", tuple(diagnostics))

    def to_json(self) -> dict:
        return {
            "rule": self.rule,
            "status": self.status,
            "diagnostics": [d.to_json() for d in self.diagnostics],
        }


@dataclass
class RunReport:
    firings: int
    new_facts: list[Fact]
    iterations: int
    diverged: bool = False

    def to_json(self) -> dict:
        return {
            "firings": self.firings,
            "new_facts": [ir.fact_to_json(f) for f in self.new_facts],
            "iterations": self.iterations,
            "diverged": self.diverged,
        }


def _unify(pattern, fact: Fact, env: dict[str, Const]) -> dict[str, Const] | None:
    for slot, const in pattern.slot_eq.items():
        if fact.values.get(slot) != const:
            return None
    out = env
    for slot, var in pattern.slot_bind.items():
        value = fact.values.get(slot)
        if value is None:
            return None
        bound = out.get(var.name)
        if bound is None:
            if out is env:
                out = dict(env)
            out[var.name] = value
        elif bound != value:
            return None
    return dict(out) if out is env else out


def _guard_holds(guard, env: dict[str, Const]) -> bool:
    lhs = env[guard.lhs.name]
    rhs = env[guard.rhs.name] if isinstance(guard.rhs, Var) else guard.rhs
    if guard.op == "==":
        return lhs == rhs
    if guard.op == "!=":
        return lhs != rhs
    # Ordering is integer-only; checked rules guarantee it, unchecked input
    # simply fails to match rather than crashing the engine.
    if lhs.kind != "integer" or rhs.kind != "integer":
        return False
    if guard.op == "<":
        return lhs.value < rhs.value
    if guard.op == "<=":
        return lhs.value <= rhs.value
    if guard.op == ">":
        return lhs.value > rhs.value
    return lhs.value >= rhs.value


def naive_match(ks: "KnowledgeSet", rule: RuleIR) -> list[tuple[dict[str, Const], tuple[Fact, ...]]]:
    """All satisfying assignments with the fact tuple that justified each.

    Facts are enumerated in canonical order and patterns joined left to
    right, so the result order is a pure function of the knowledge set.
    """
    by_type: dict[str, list[Fact]] = {}
    for fact in sorted_facts(ks.facts):
        by_type.setdefault(fact.type_name, []).append(fact)

    results: list[tuple[dict[str, Const], tuple[Fact, ...]]] = []

    def extend(i: int, env: dict[str, Const], chosen: tuple[Fact, ...]) -> None:
        if i == len(rule.patterns):
            if all(_guard_holds(g, env) for g in rule.guards):
                results.append((env, chosen))
            return
        pattern = rule.patterns[i]
        for fact in by_type.get(pattern.type_name, ()):
            nxt = _unify(pattern, fact, env)
            if nxt is not None:
                extend(i + 1, nxt, chosen + (fact,))

    extend(0, {}, ())
    return results


@dataclass
class KnowledgeSet:
    """A named working memory: one unit of mutual exclusion."""

    name: str
    dialect: str
    types: dict[str, FactType] = field(default_factory=dict)
    facts: set[Fact] = field(default_factory=set)
    rules: list[RuleEntry] = field(default_factory=list)
    refraction: set[tuple[str, tuple[Fact, ...]]] = field(default_factory=set)

    def __post_init__(self):
        self._lock = threading.RLock()
        self._matcher = naive_match

    @property
    def type_list(self) -> list[FactType]:
        return list(self.types.values())

    # --- facts ---

    def _validate_fact(self, fact: Fact) -> None:
        ftype = self.types.get(fact.type_name)
        if ftype is None:
            raise RuleMeshError(ir.E_UNKNOWN_TYPE, f"unknown fact type {fact.type_name!r}")
        declared = ftype.slot_kinds
        for slot in fact.values:
            if slot not in declared:
                raise RuleMeshError(
                    ir.E_UNKNOWN_SLOT, f"type {fact.type_name!r} has no slot {slot!r}"
                )
        for slot, kind in declared.items():
            value = fact.values.get(slot)
            if value is None:
                raise RuleMeshError(
                    ir.E_KIND_MISMATCH, f"fact misses slot {slot!r} of {fact.type_name!r}"
                )
            if value.kind != kind:
                raise RuleMeshError(
                    ir.E_KIND_MISMATCH,
                    f"slot {slot!r} of {fact.type_name!r} is {kind}, got {value.kind}",
                )

    def assert_fact(self, fact: Fact) -> bool:
        with self._lock:
            self._validate_fact(fact)
            if fact in self.facts:
                return False
            self.facts.add(fact)
            return True

    def retract_fact(self, fact: Fact) -> bool:
        with self._lock:
            self._validate_fact(fact)
            if fact not in self.facts:
                return False
            self.facts.discard(fact)
            # Conservative: drop every refraction entry justified by the fact.
            self.refraction = {
                entry for entry in self.refraction if fact not in entry[1]
            }
            return True

    def list_facts(self) -> list[Fact]:
        with self._lock:
            return sorted_facts(self.facts)

    # --- rules ---

    def add_rule(self, text: str, index: int = 0) -> Verdict:
        """Trial registration: parse, check, install; nothing is stored on failure."""
        with self._lock:
            module = dialect_module(self.dialect)
            doc = module.parse_document(text, self.type_list)
            if doc.diagnostics:
                return Verdict.invalid(index, doc.diagnostics)
            rule_blocks = [b for b in doc.blocks if b.kind == "rule"]
            decl_blocks = [b for b in doc.blocks if b.kind == "declaration"]
            if decl_blocks:
                return Verdict.invalid(
                    index,
                    [Diagnostic(ir.E_GRAMMAR, "only rule blocks are allowed here",
                                decl_blocks[0].line, decl_blocks[0].column)],
                )
            if len(rule_blocks) != 1:
                return Verdict.invalid(
                    index,
                    [Diagnostic(ir.E_GRAMMAR,
                                f"expected exactly one rule, found {len(rule_blocks)}")],
                )
            block = rule_blocks[0]
            label = block.name if block.name is not None else index
            if not block.ok:
                return Verdict.invalid(label, block.diagnostics)
            if any(e.name == block.name for e in self.rules):
                return Verdict.invalid(
                    label,
                    [Diagnostic(ir.E_DUPLICATE_RULE, f"rule {block.name!r} already present")],
                )
            self.rules.append(RuleEntry(block.name, text, block.item))
            return Verdict.valid(label)

    def remove_rule(self, name: str) -> bool:
        with self._lock:
            before = len(self.rules)
            self.rules = [e for e in self.rules if e.name != name]
            if len(self.rules) == before:
                return False
            self.refraction = {e for e in self.refraction if e[0] != name}
            return True

    def get_rules(self, name_filter: str | None = None) -> list[RuleEntry]:
        with self._lock:
            if name_filter is None:
                return list(self.rules)
            return [e for e in self.rules if name_filter in e.name]

    def validate(self, text: str) -> list[Verdict]:
        """Per-block trial registration; the knowledge set ends bit-identical."""
        with self._lock:
            module = dialect_module(self.dialect)
            doc = module.parse_document(text, self.type_list)
            if doc.diagnostics:
                return [Verdict.invalid(0, doc.diagnostics)]
            verdicts: list[Verdict] = []
            for i, block in enumerate(doc.blocks):
                verdict = self.add_rule(block.text, index=i)
                if verdict.status == "valid":
                    self.remove_rule(str(verdict.rule))
                verdicts.append(verdict)
            return verdicts

    # --- matching and running ---

    def match(self, rule: RuleIR) -> list[dict[str, Const]]:
        with self._lock:
            return [env for env, _ in self._matcher(self, rule)]

    def run(self, max_firings: int = 10000) -> RunReport:
        with self._lock:
            before = set(self.facts)
            firings = 0
            iterations = 0
            while True:
                iterations += 1
                fired = 0
                for entry in list(self.rules):
                    for env, justification in self._matcher(self, entry.rule):
                        key = (entry.name, justification)
                        if key in self.refraction:
                            continue
                        self.refraction.add(key)
                        fired += 1
                        firings += 1
                        if firings > max_firings:
                            raise RuleMeshError(
                                ir.E_DIVERGED,
                                f"exceeded {max_firings} firings in knowledge set {self.name!r}",
                            )
                        for action in entry.rule.actions:
                            values = {
                                slot: env[t.name] if isinstance(t, Var) else t
                                for slot, t in action.values.items()
                            }
                            self.facts.add(Fact(action.type_name, values))
                if fired == 0:
                    break
            return RunReport(firings, sorted_facts(self.facts - before), iterations)

    # --- state ---

    def snapshot(self) -> bytes:
        """Deterministic serialized state; equality means bit-identical sets."""
        with self._lock:
            refraction = sorted(
                ([name, [ir.fact_to_json(f) for f in facts]] for name, facts in self.refraction),
                key=lambda e: (e[0], json.dumps(e[1], sort_keys=True)),
            )
            state = {
                "name": self.name,
                "dialect": self.dialect,
                "types": [ir.facttype_to_json(t) for t in self.types.values()],
                "facts": [ir.fact_to_json(f) for f in self.list_facts()],
                "rules": [
                    {"name": e.name, "text": e.text, "ir": ir.rule_to_json(e.rule)}
                    for e in self.rules
                ],
                "refraction": refraction,
            }
            return json.dumps(state, sort_keys=True, ensure_ascii=False).encode("utf-8")


class RuleEngine:
    """A collection of knowledge sets sharing one dialect and one matcher."""

    def __init__(self, dialect: str, matcher=naive_match):
        dialect_module(dialect)
        self.dialect = dialect
        self.engine_id = str(uuid.uuid4())
        self._matcher = matcher
        self._sets: dict[str, KnowledgeSet] = {}
        self._lock = threading.RLock()

    def knowledge_set_names(self) -> list[str]:
        with self._lock:
            return sorted(self._sets)

    def get(self, name: str) -> KnowledgeSet:
        with self._lock:
            ks = self._sets.get(name)
        if ks is None:
            raise RuleMeshError(ir.E_NOT_FOUND, f"unknown knowledge set {name!r}")
        return ks

    def create_knowledge_set(
        self, name: str, declarations_text: str = "", dialect: str | None = None
    ) -> KnowledgeSet:
        dialect = dialect or self.dialect
        module = dialect_module(dialect)
        with self._lock:
            if name in self._sets:
                raise RuleMeshError(ir.E_EXISTS, f"knowledge set {name!r} already exists")
            doc = module.parse_document(declarations_text, rules="reject")
            problems = doc.all_diagnostics
            if problems:
                first = problems[0]
                raise RuleMeshError(ir.E_GRAMMAR, first.detail, first.line, first.column)
            types: dict[str, FactType] = {}
            for ftype in doc.declarations:
                if ftype.name in types:
                    raise RuleMeshError(ir.E_GRAMMAR, f"duplicate type {ftype.name!r}")
                types[ftype.name] = ftype
            ks = KnowledgeSet(name, dialect, types)
            ks._matcher = self._matcher
            self._sets[name] = ks
            return ks

    def delete_knowledge_set(self, name: str) -> bool:
        with self._lock:
            return self._sets.pop(name, None) is not None
