"""Neutral rule representation shared by every dialect.

A rule is a conjunction of slotted patterns, a list of comparison guards
over pattern-bound variables, and a list of assert actions.  All dialect
translation goes through this form, so alpha-equivalence of two rules is
decided by comparing their canonical forms for plain equality.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

KINDS = ("string", "integer", "boolean")
OPS = ("==", "!=", "<", "<=", ">", ">=")
ORDERING_OPS = ("<", "<=", ">", ">=")

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

# Diagnostic codes used across the system.
E_UNKNOWN_TYPE = "E_UNKNOWN_TYPE"
E_UNKNOWN_SLOT = "E_UNKNOWN_SLOT"
E_UNBOUND_VAR = "E_UNBOUND_VAR"
E_KIND_MISMATCH = "E_KIND_MISMATCH"
E_INCOMPLETE_ACTION = "E_INCOMPLETE_ACTION"
E_UNCHECKED = "E_UNCHECKED"
E_GRAMMAR = "E_GRAMMAR"
E_UNSUPPORTED = "E_UNSUPPORTED"
E_UNPRINTABLE = "E_UNPRINTABLE"
E_EXISTS = "E_EXISTS"
E_NOT_FOUND = "E_NOT_FOUND"
E_DUPLICATE_RULE = "E_DUPLICATE_RULE"
E_DIVERGED = "E_DIVERGED"
E_BAD_REQUEST = "E_BAD_REQUEST"
E_REGISTRY_UNREACHABLE = "E_REGISTRY_UNREACHABLE"
E_ENGINE_UNREACHABLE = "E_ENGINE_UNREACHABLE"


@dataclass(frozen=True)
class Diagnostic:
    """One structured finding: a code, a human detail, and an optional 1-based position."""

    code: str
    detail: str
    line: int | None = None
    column: int | None = None

    def to_json(self) -> dict:
        out: dict = {"code": self.code, "detail": self.detail}
        if self.line is not None:
            out["position"] = {"line": self.line, "column": self.column}
        return out

    @staticmethod
    def from_json(d: dict) -> "Diagnostic":
        pos = d.get("position") or {}
        return Diagnostic(d["code"], d.get("detail", ""), pos.get("line"), pos.get("column"))


class RuleMeshError(Exception):
    """Raised where an operation's contract names an error code instead of a diagnostic list."""

    def __init__(self, code: str, detail: str, line: int | None = None, column: int | None = None):
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail
        self.line = line
        self.column = column

    def to_diagnostic(self) -> Diagnostic:
        return Diagnostic(self.code, self.detail, self.line, self.column)


def kind_of(value: str | int | bool) -> str:
    # bool must win before int: True is an int in Python.
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, str):
        return "string"
    raise TypeError(f"unsupported constant type: {type(value).__name__}")


@dataclass(frozen=True, eq=False)
class Const:
    value: str | int | bool

    def __post_init__(self):
        kind = kind_of(self.value)
        if kind == "integer" and not (INT64_MIN <= self.value <= INT64_MAX):
            raise ValueError(f"integer constant out of 64-bit range: {self.value}")

    @property
    def kind(self) -> str:
        return kind_of(self.value)

    # True == 1 in Python; constants of different kinds must never compare equal.
    def __eq__(self, other) -> bool:
        return isinstance(other, Const) and self.kind == other.kind and self.value == other.value

    def __hash__(self) -> int:
        return hash((self.kind, self.value))

    def __repr__(self) -> str:
        return f"Const({self.value!r})"


@dataclass(frozen=True)
class Var:
    name: str
    synthetic: bool = False

    def __post_init__(self):
        if not IDENT_RE.match(self.name):
            raise ValueError(f"invalid variable name: {self.name!r}")


Term = Const | Var


@dataclass(frozen=True)
class FactType:
    """A slotted fact template: an ordered list of (slot name, kind)."""

    name: str
    slots: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple((s, k) for s, k in self.slots))
        seen = set()
        for slot, kind in self.slots:
            if slot in seen:
                raise ValueError(f"duplicate slot {slot!r} in type {self.name}")
            seen.add(slot)
            if kind not in KINDS:
                raise ValueError(f"unknown slot kind {kind!r} in type {self.name}")

    @property
    def slot_kinds(self) -> dict[str, str]:
        return dict(self.slots)


@dataclass(frozen=True, eq=False)
class Fact:
    """A ground fact; compared by value, so working memories have set semantics."""

    type_name: str
    values: dict[str, Const]

    def __post_init__(self):
        object.__setattr__(self, "values", {k: self.values[k] for k in sorted(self.values)})

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Fact)
            and self.type_name == other.type_name
            and self.values == other.values
        )

    def __hash__(self) -> int:
        return hash((self.type_name, tuple((k, v) for k, v in self.values.items())))

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v.value!r}" for k, v in self.values.items())
        return f"Fact({self.type_name}: {inner})"

    def sort_key(self):
        # Total order within a type: slot kinds agree, so raw values compare.
        return (self.type_name, tuple((k, v.kind, v.value) for k, v in self.values.items()))


def sorted_facts(facts) -> list[Fact]:
    """Canonical fact order: type name, then values with slot names sorted."""
    return sorted(facts, key=Fact.sort_key)


@dataclass(frozen=True)
class Pattern:
    type_name: str
    slot_eq: dict[str, Const] = field(default_factory=dict)
    slot_bind: dict[str, Var] = field(default_factory=dict)

    def __post_init__(self):
        overlap = set(self.slot_eq) & set(self.slot_bind)
        if overlap:
            raise ValueError(f"slots both equated and bound in {self.type_name}: {sorted(overlap)}")


@dataclass(frozen=True)
class Guard:
    lhs: Var
    op: str
    rhs: Term

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"unknown guard operator {self.op!r}")


@dataclass(frozen=True)
class AssertAction:
    type_name: str
    values: dict[str, Term]


@dataclass(frozen=True)
class RuleIR:
    name: str
    patterns: tuple[Pattern, ...]
    guards: tuple[Guard, ...] = ()
    actions: tuple[AssertAction, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "patterns", tuple(self.patterns))
        object.__setattr__(self, "guards", tuple(self.guards))
        object.__setattr__(self, "actions", tuple(self.actions))
        if not self.patterns:
            raise ValueError("a rule needs at least one pattern")
        if not self.actions:
            raise ValueError("a rule needs at least one action")


def _binding_kinds(rule: RuleIR, types_by_name: dict[str, FactType]) -> dict[str, str | None]:
    kinds: dict[str, str | None] = {}
    for pat in rule.patterns:
        ftype = types_by_name.get(pat.type_name)
        for slot in sorted(pat.slot_bind):
            name = pat.slot_bind[slot].name
            if name in kinds:
                continue
            if ftype is None:
                kinds[name] = None
            else:
                kinds[name] = ftype.slot_kinds.get(slot)
    return kinds


def check(rule: RuleIR, types: list[FactType] | None) -> list[Diagnostic]:
    """Validate a rule; empty result means every invariant holds.

    With ``types=None`` only the type-independent invariants are checked
    (range restriction); callers without a working-memory context use that
    mode before printing or canonicalizing.
    """
    diags: list[Diagnostic] = []
    typed = types is not None
    types_by_name = {t.name: t for t in types or []}
    var_kinds = _binding_kinds(rule, types_by_name)

    if typed:
        for pat in rule.patterns:
            ftype = types_by_name.get(pat.type_name)
            if ftype is None:
                diags.append(Diagnostic(E_UNKNOWN_TYPE, f"unknown fact type {pat.type_name!r}"))
                continue
            declared = ftype.slot_kinds
            for slot in sorted(set(pat.slot_eq) | set(pat.slot_bind)):
                if slot not in declared:
                    diags.append(
                        Diagnostic(E_UNKNOWN_SLOT, f"type {pat.type_name!r} has no slot {slot!r}")
                    )
            for slot, const in sorted(pat.slot_eq.items()):
                want = declared.get(slot)
                if want is not None and const.kind != want:
                    diags.append(
                        Diagnostic(
                            E_KIND_MISMATCH,
                            f"slot {slot!r} of {pat.type_name!r} is {want}, got {const.kind}",
                        )
                    )

    for guard in rule.guards:
        operand_kinds = []
        if guard.lhs.name not in var_kinds:
            diags.append(Diagnostic(E_UNBOUND_VAR, f"unbound variable ${guard.lhs.name} in guard"))
        else:
            operand_kinds.append(var_kinds[guard.lhs.name])
        if isinstance(guard.rhs, Var):
            if guard.rhs.name not in var_kinds:
                diags.append(
                    Diagnostic(E_UNBOUND_VAR, f"unbound variable ${guard.rhs.name} in guard")
                )
            else:
                operand_kinds.append(var_kinds[guard.rhs.name])
        else:
            operand_kinds.append(guard.rhs.kind)
        if typed and guard.op in ORDERING_OPS:
            for k in operand_kinds:
                if k is not None and k != "integer":
                    diags.append(
                        Diagnostic(
                            E_KIND_MISMATCH,
                            f"operator {guard.op!r} needs integer operands, got {k}",
                        )
                    )

    for action in rule.actions:
        ftype = types_by_name.get(action.type_name) if typed else None
        if typed and ftype is None:
            diags.append(Diagnostic(E_UNKNOWN_TYPE, f"unknown fact type {action.type_name!r}"))
        declared = ftype.slot_kinds if ftype else {}
        if ftype is not None:
            missing = [s for s, _ in ftype.slots if s not in action.values]
            if missing:
                diags.append(
                    Diagnostic(
                        E_INCOMPLETE_ACTION,
                        f"assert {action.type_name!r} misses slots: {', '.join(missing)}",
                    )
                )
            for slot in sorted(action.values):
                if slot not in declared:
                    diags.append(
                        Diagnostic(
                            E_UNKNOWN_SLOT, f"type {action.type_name!r} has no slot {slot!r}"
                        )
                    )
        for slot in sorted(action.values):
            term = action.values[slot]
            want = declared.get(slot)
            if isinstance(term, Var):
                if term.name not in var_kinds:
                    diags.append(
                        Diagnostic(E_UNBOUND_VAR, f"unbound variable ${term.name} in assert")
                    )
                elif want is not None and var_kinds[term.name] not in (None, want):
                    diags.append(
                        Diagnostic(
                            E_KIND_MISMATCH,
                            f"slot {slot!r} of {action.type_name!r} is {want},"
                            f" got {var_kinds[term.name]} variable ${term.name}",
                        )
                    )
            elif typed and want is not None and term.kind != want:
                diags.append(
                    Diagnostic(
                        E_KIND_MISMATCH,
                        f"slot {slot!r} of {action.type_name!r} is {want}, got {term.kind}",
                    )
                )
    return diags


def render_const(const: Const) -> str:
    """Neutral literal text: quoted string, decimal integer, true/false."""
    if const.kind == "string":
        escaped = const.value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if const.kind == "boolean":
        return "true" if const.value else "false"
    return str(const.value)


def render_term(term: Term) -> str:
    if isinstance(term, Var):
        return f"${term.name}"
    return render_const(term)


def canonicalize(rule: RuleIR) -> RuleIR:
    """Alpha-normal form: variables become v0, v1, ... in first-occurrence order.

    Occurrence order is patterns in author order with slot_bind visited in
    slot-name order, then guards, then actions.  Guards are sorted, slot maps
    re-keyed in slot-name order, and synthetic flags dropped, so two rules are
    alpha-equivalent exactly when their canonical forms are equal.
    """
    failures = check(rule, None)
    if failures:
        raise RuleMeshError(E_UNCHECKED, "; ".join(d.detail for d in failures))

    names: dict[str, str] = {}

    def rename(var: Var) -> Var:
        if var.name not in names:
            names[var.name] = f"v{len(names)}"
        return Var(names[var.name])

    patterns = []
    for pat in rule.patterns:
        slot_eq = {s: pat.slot_eq[s] for s in sorted(pat.slot_eq)}
        slot_bind = {s: rename(pat.slot_bind[s]) for s in sorted(pat.slot_bind)}
        patterns.append(Pattern(pat.type_name, slot_eq, slot_bind))

    guards = []
    for g in rule.guards:
        rhs = rename(g.rhs) if isinstance(g.rhs, Var) else g.rhs
        guards.append(Guard(rename(g.lhs), g.op, rhs))
    guards.sort(key=lambda g: (g.lhs.name, g.op, render_term(g.rhs)))

    actions = []
    for act in rule.actions:
        values: dict[str, Term] = {}
        for slot in sorted(act.values):
            term = act.values[slot]
            values[slot] = rename(term) if isinstance(term, Var) else term
        actions.append(AssertAction(act.type_name, values))

    return RuleIR(rule.name, tuple(patterns), tuple(guards), tuple(actions))


# --- stable JSON rendering (gateway wire format and test fixtures) ---


def term_to_json(term: Term) -> dict:
    if isinstance(term, Var):
        return {"var": term.name, "synthetic": term.synthetic}
    return {"const": term.value}


def term_from_json(d: dict) -> Term:
    if "const" in d:
        return Const(d["const"])
    return Var(d["var"], bool(d.get("synthetic", False)))


def rule_to_json(rule: RuleIR) -> dict:
    return {
        "name": rule.name,
        "patterns": [
            {
                "type_name": p.type_name,
                "slot_eq": {s: term_to_json(p.slot_eq[s]) for s in sorted(p.slot_eq)},
                "slot_bind": {s: term_to_json(p.slot_bind[s]) for s in sorted(p.slot_bind)},
            }
            for p in rule.patterns
        ],
        "guards": [
            {"lhs": term_to_json(g.lhs), "op": g.op, "rhs": term_to_json(g.rhs)}
            for g in rule.guards
        ],
        "actions": [
            {
                "type_name": a.type_name,
                "values": {s: term_to_json(a.values[s]) for s in sorted(a.values)},
            }
            for a in rule.actions
        ],
    }


def rule_from_json(d: dict) -> RuleIR:
    return RuleIR(
        d["name"],
        tuple(
            Pattern(
                p["type_name"],
                {s: term_from_json(t) for s, t in p.get("slot_eq", {}).items()},
                {s: term_from_json(t) for s, t in p.get("slot_bind", {}).items()},
            )
            for p in d["patterns"]
        ),
        tuple(
            Guard(term_from_json(g["lhs"]), g["op"], term_from_json(g["rhs"]))
            for g in d.get("guards", [])
        ),
        tuple(
            AssertAction(a["type_name"], {s: term_from_json(t) for s, t in a["values"].items()})
            for a in d.get("actions", [])
        ),
    )


def fact_to_json(fact: Fact) -> dict:
    return {"type_name": fact.type_name, "values": {s: c.value for s, c in fact.values.items()}}


def fact_from_json(d: dict) -> Fact:
    return Fact(d["type_name"], {s: Const(v) for s, v in d["values"].items()})


def facttype_to_json(t: FactType) -> dict:
    return {"name": t.name, "slots": [[s, k] for s, k in t.slots]}


def facttype_from_json(d: dict) -> FactType:
    return FactType(d["name"], tuple((s, k) for s, k in d["slots"]))
