"""clips-mini: a CLIPS/Jess-flavoured s-expression rule dialect.

Top-level forms are ``deftemplate`` and ``defrule``; comments run from ``;``
to end of line; variables are ``?ident``; strings are double-quoted with
``\\"`` escapes; booleans are the symbols TRUE and FALSE; test comparators
are the shared six (==, !=, <, <=, >, >=).

The ``not`` conditional element parses but is rejected at lowering: it lies
outside the feature intersection of the supported dialects, so rules using
it are reported with E_UNSUPPORTED instead of being silently rewritten.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from . import ir
from .blocks import Block, ParsedDocument
from .ir import (
    AssertAction,
    Const,
    Diagnostic,
    FactType,
    Guard,
    Pattern,
    RuleIR,
    RuleMeshError,
    Term,
    Var,
)
from .lowering import SlotLowerer, split_state

DIALECT_ID = "clips-mini"

_INT_RE = re.compile(r"-?[0-9]+\Z")
_KIND_UP = {"string": "STRING", "integer": "INTEGER", "boolean": "BOOLEAN"}
_KIND_DOWN = {v: k for k, v in _KIND_UP.items()}


@dataclass(frozen=True)
class SAtom:
    """A raw token: string literals keep their quotes at this level."""

    text: str
    line: int
    column: int
    start: int
    end: int


@dataclass
class SList:
    items: list
    line: int
    column: int
    start: int
    end: int = 0


SExpr = SAtom | SList


class _ReadError(Exception):
    def __init__(self, msg: str, line: int, column: int):
        super().__init__(msg)
        self.msg = msg
        self.line = line
        self.column = column


_DELIMS = set('();" \t\r\n')


def _tokens(text: str):
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == ";":
            j = text.find("\n", i)
            j = n if j < 0 else j
            col += j - i
            i = j
            continue
        sline, scol, start = line, col, i
        if c in "()":
            yield (c, c, sline, scol, start, i + 1)
            i += 1
            col += 1
            continue
        if c == '"':
            j = i + 1
            while j < n:
                if text[j] == "\\":
                    if j + 1 < n and text[j + 1] in ('"', "\\"):
                        j += 2
                        continue
                    raise _ReadError("bad escape in string literal", sline, scol)
                if text[j] == '"':
                    break
                if text[j] == "\n":
                    raise _ReadError("unterminated string literal", sline, scol)
                j += 1
            if j >= n:
                raise _ReadError("unterminated string literal", sline, scol)
            raw = text[i : j + 1]
            yield ("atom", raw, sline, scol, start, j + 1)
            col += j + 1 - i
            i = j + 1
            continue
        j = i
        while j < n and text[j] not in _DELIMS:
            j += 1
        yield ("atom", text[i:j], sline, scol, start, j)
        col += j - i
        i = j
    yield ("eof", "", line, col, n, n)


def read_forms(text: str) -> tuple[list[SExpr], list[Diagnostic]]:
    """Read top-level s-expressions; recovers from stray ')' but not from EOF in a list."""
    forms: list[SExpr] = []
    diags: list[Diagnostic] = []
    stack: list[SList] = []
    try:
        for kind, value, line, col, start, end in _tokens(text):
            if kind == "(":
                stack.append(SList([], line, col, start))
                continue
            if kind == ")":
                if not stack:
                    diags.append(Diagnostic(ir.E_GRAMMAR, "unbalanced ')'", line, col))
                    continue
                done = stack.pop()
                done.end = end
                (stack[-1].items if stack else forms).append(done)
                continue
            if kind == "eof":
                if stack:
                    top = stack[0]
                    diags.append(
                        Diagnostic(ir.E_GRAMMAR, "unclosed '('", top.line, top.column)
                    )
                break
            atom = SAtom(value, line, col, start, end)
            (stack[-1].items if stack else forms).append(atom)
    except _ReadError as e:
        diags.append(Diagnostic(ir.E_GRAMMAR, e.msg, e.line, e.column))
    return forms, diags


class _FormError(Exception):
    def __init__(self, msg: str, node: SExpr):
        super().__init__(msg)
        self.msg = msg
        self.node = node


def _grammar(msg: str, node: SExpr) -> Diagnostic:
    return Diagnostic(ir.E_GRAMMAR, msg, node.line, node.column)


def _unescape(raw: str) -> str:
    return raw[1:-1].replace('\\"', '"').replace("\\\\", "\\")


def _decode(atom: SExpr) -> tuple[str, object]:
    """Classify a raw atom: ("string"|"int"|"bool"|"var"|"ident", value)."""
    if not isinstance(atom, SAtom):
        raise _FormError("expected an atom, got a list", atom)
    text = atom.text
    if text.startswith('"'):
        return "string", _unescape(text)
    if text.startswith("?"):
        name = text[1:]
        if not ir.IDENT_RE.match(name):
            raise _FormError(f"bad variable name {text!r}", atom)
        return "var", name
    if text in ("TRUE", "FALSE"):
        return "bool", text == "TRUE"
    if _INT_RE.match(text):
        value = int(text)
        if not (ir.INT64_MIN <= value <= ir.INT64_MAX):
            raise _FormError("integer literal out of 64-bit range", atom)
        return "int", value
    if ir.IDENT_RE.match(text):
        return "ident", text
    raise _FormError(f"unexpected token {text!r}", atom)


def _decode_value(atom: SExpr) -> Term:
    kind, value = _decode(atom)
    if kind == "var":
        return Var(value)
    if kind in ("string", "int", "bool"):
        return Const(value)
    raise _FormError(f"expected a literal or variable, got {atom.text!r}", atom)


def _ident(node: SExpr, what: str) -> str:
    kind, value = _decode(node)
    if kind != "ident":
        raise _FormError(f"expected {what}", node)
    return value


def _parse_deftemplate(form: SList) -> FactType:
    if len(form.items) < 2:
        raise _FormError("deftemplate needs a name", form)
    name = _ident(form.items[1], "a template name")
    slots: list[tuple[str, str]] = []
    seen: set[str] = set()
    for node in form.items[2:]:
        if not isinstance(node, SList) or len(node.items) != 3:
            raise _FormError("expected (slot name (type KIND))", node)
        head, slot_node, type_node = node.items
        if not (isinstance(head, SAtom) and head.text == "slot"):
            raise _FormError("expected (slot name (type KIND))", head)
        slot = _ident(slot_node, "a slot name")
        if not (
            isinstance(type_node, SList)
            and len(type_node.items) == 2
            and isinstance(type_node.items[0], SAtom)
            and type_node.items[0].text == "type"
        ):
            raise _FormError("expected (type STRING|INTEGER|BOOLEAN)", type_node)
        kind_node = type_node.items[1]
        if not (isinstance(kind_node, SAtom) and kind_node.text in _KIND_DOWN):
            raise _FormError("expected slot type STRING, INTEGER or BOOLEAN", kind_node)
        if slot in seen:
            raise _FormError(f"duplicate slot {slot!r}", slot_node)
        seen.add(slot)
        slots.append((slot, _KIND_DOWN[kind_node.text]))
    if not slots:
        raise _FormError("a deftemplate needs at least one slot", form)
    return FactType(name, tuple(slots))


def _collect_vars(node: SExpr, out: set[str]) -> None:
    if isinstance(node, SAtom):
        if node.text.startswith("?"):
            out.add(node.text[1:])
        return
    for child in node.items:
        _collect_vars(child, out)


def _parse_defrule(form: SList, types: list[FactType] | None) -> tuple[RuleIR | None, list[Diagnostic]]:
    diags: list[Diagnostic] = []
    if len(form.items) < 2:
        raise _FormError("defrule needs a name", form)
    name_node = form.items[1]
    kind, name = _decode(name_node)
    if kind not in ("ident", "string"):
        raise _FormError("expected a rule name", name_node)

    arrow = None
    for idx, node in enumerate(form.items):
        if isinstance(node, SAtom) and node.text == "=>":
            arrow = idx
            break
    if arrow is None:
        raise _FormError("defrule needs '=>'", form)
    condition_nodes = form.items[2:arrow]
    action_nodes = form.items[arrow + 1 :]

    user_vars: set[str] = set()
    _collect_vars(form, user_vars)
    lower = SlotLowerer(user_vars)

    patterns: list[Pattern] = []
    tests_started = False
    for node in condition_nodes:
        if not isinstance(node, SList) or not node.items:
            raise _FormError("expected a pattern or (test ...)", node)
        head = node.items[0]
        head_text = head.text if isinstance(head, SAtom) else None
        if head_text == "not":
            if len(node.items) != 2 or not isinstance(node.items[1], SList):
                raise _FormError("'not' takes exactly one pattern", node)
            diags.append(
                Diagnostic(
                    ir.E_UNSUPPORTED,
                    "the 'not' conditional element is outside the interchangeable subset",
                    node.line,
                    node.column,
                )
            )
            continue
        if head_text == "test":
            tests_started = True
            if len(node.items) != 2 or not isinstance(node.items[1], SList):
                raise _FormError("expected (test (OP ?var value))", node)
            cmp = node.items[1]
            if len(cmp.items) != 3:
                raise _FormError("expected (OP ?var value)", cmp)
            op_node, lhs_node, rhs_node = cmp.items
            if not (isinstance(op_node, SAtom) and op_node.text in ir.OPS):
                raise _FormError("expected a comparison operator", op_node)
            lhs_kind, lhs_name = _decode(lhs_node)
            if lhs_kind != "var":
                raise _FormError("test left operand must be a variable", lhs_node)
            lower.guards.append(Guard(Var(lhs_name), op_node.text, _decode_value(rhs_node)))
            continue
        if tests_started:
            raise _FormError("patterns must precede tests", node)
        type_name = _ident(head, "a fact type name")
        state: dict[str, tuple[str, Const | Var]] = {}
        for slot_node in node.items[1:]:
            if not isinstance(slot_node, SList) or len(slot_node.items) != 2:
                raise _FormError("expected (slot value)", slot_node)
            slot = _ident(slot_node.items[0], "a slot name")
            value = _decode_value(slot_node.items[1])
            if isinstance(value, Var):
                lower.constrain(state, slot, "bind", None, value)
            else:
                lower.constrain(state, slot, "op", "==", value)
        slot_eq, slot_bind = split_state(state)
        patterns.append(Pattern(type_name, slot_eq, slot_bind))

    if not patterns and not diags:
        raise _FormError("empty condition: at least one pattern required", form)

    actions: list[AssertAction] = []
    if not action_nodes:
        raise _FormError("empty action list: at least one assert required", form)
    for node in action_nodes:
        if (
            not isinstance(node, SList)
            or len(node.items) != 2
            or not (isinstance(node.items[0], SAtom) and node.items[0].text == "assert")
            or not isinstance(node.items[1], SList)
        ):
            raise _FormError("expected (assert (Type (slot value) ...))", node)
        spec = node.items[1]
        if not spec.items:
            raise _FormError("assert needs a fact type", spec)
        type_name = _ident(spec.items[0], "a fact type name")
        values: dict[str, Term] = {}
        for slot_node in spec.items[1:]:
            if not isinstance(slot_node, SList) or len(slot_node.items) != 2:
                raise _FormError("expected (slot value)", slot_node)
            slot = _ident(slot_node.items[0], "a slot name")
            if slot in values:
                diags.append(
                    Diagnostic(
                        ir.E_INCOMPLETE_ACTION,
                        f"slot {slot!r} listed twice in assert",
                        slot_node.line,
                        slot_node.column,
                    )
                )
                continue
            values[slot] = _decode_value(slot_node.items[1])
        actions.append(AssertAction(type_name, values))

    if diags:
        return None, diags
    rule = RuleIR(name, tuple(patterns), tuple(lower.guards), tuple(actions))
    diags.extend(ir.check(rule, types))
    return (rule if not diags else None), diags


def parse_document(text: str, types: list[FactType] | None = None,
                   rules: str = "parse") -> ParsedDocument:
    """Parse a whole document.  ``rules`` is "parse", "skip" or "reject"."""
    doc = ParsedDocument()
    forms, read_diags = read_forms(text)
    doc.diagnostics.extend(read_diags)

    typed = types is not None
    context = list(types) if typed else []
    parsed: list[tuple[SList, str]] = []
    for form in forms:
        if not isinstance(form, SList) or not form.items or not isinstance(form.items[0], SAtom):
            doc.diagnostics.append(_grammar("expected (deftemplate ...) or (defrule ...)", form))
            continue
        head = form.items[0].text
        if head not in ("deftemplate", "defrule"):
            doc.diagnostics.append(_grammar(f"unknown top-level form {head!r}", form))
            continue
        parsed.append((form, head))

    # Declarations first so rules can reference types declared later in the text.
    ordered: list[tuple[int, Block]] = []
    for form, head in parsed:
        if head != "deftemplate":
            continue
        block = Block("declaration", None, text[form.start : form.end], form.line, form.column)
        try:
            ftype = _parse_deftemplate(form)
            block.item = ftype
            block.name = ftype.name
            context = [t for t in context if t.name != ftype.name] + [ftype]
        except _FormError as e:
            block.diagnostics.append(_grammar(e.msg, e.node))
        ordered.append((form.start, block))

    for form, head in parsed:
        if head != "defrule" or rules == "skip":
            continue
        block = Block("rule", None, text[form.start : form.end], form.line, form.column)
        if rules == "reject":
            block.diagnostics.append(_grammar("only declarations are allowed here", form))
        else:
            try:
                if len(form.items) > 1 and isinstance(form.items[1], SAtom):
                    kind, value = _decode(form.items[1])
                    if kind in ("ident", "string"):
                        block.name = value
                rule, rdiags = _parse_defrule(form, context if typed else None)
                block.diagnostics.extend(rdiags)
                block.item = rule
            except _FormError as e:
                block.diagnostics.append(_grammar(e.msg, e.node))
        ordered.append((form.start, block))

    doc.blocks = [b for _, b in sorted(ordered, key=lambda x: x[0])]
    return doc


def parse_declarations(text: str) -> tuple[list[FactType], list[Diagnostic]]:
    doc = parse_document(text, rules="skip")
    return doc.declarations, doc.all_diagnostics


def parse_rules(text: str, types: list[FactType]) -> tuple[list[RuleIR], list[Diagnostic]]:
    doc = parse_document(text, types)
    return doc.rules, doc.all_diagnostics


# --- printing ---


def _render_const(const: Const) -> str:
    if const.kind == "boolean":
        return "TRUE" if const.value else "FALSE"
    return ir.render_const(const)


def _render_term(term: Term) -> str:
    if isinstance(term, Var):
        return f"?{term.name}"
    return _render_const(term)


def _render_name(name: str) -> str:
    if ir.IDENT_RE.match(name) and name not in ("TRUE", "FALSE"):
        return name
    escaped = name.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def print_rule(rule: RuleIR) -> str:
    """Deterministic clips-mini text: every bound slot prints as ``(slot ?v)``,
    equalities print literals in place, guards print as tests after the
    patterns in guard order."""
    bound = {v.name for p in rule.patterns for v in p.slot_bind.values()}
    for g in rule.guards:
        if g.lhs.name not in bound:
            raise RuleMeshError(ir.E_UNPRINTABLE, f"guard variable ?{g.lhs.name} is unbound")
    lines = [f"(defrule {_render_name(rule.name)}"]
    for pat in rule.patterns:
        parts = [pat.type_name]
        for slot in sorted(set(pat.slot_eq) | set(pat.slot_bind)):
            value = pat.slot_eq[slot] if slot in pat.slot_eq else pat.slot_bind[slot]
            parts.append(f"({slot} {_render_term(value)})")
        lines.append(f"  ({' '.join(parts)})")
    for g in rule.guards:
        lines.append(f"  (test ({g.op} ?{g.lhs.name} {_render_term(g.rhs)}))")
    lines.append("  =>")
    for act in rule.actions:
        inner = " ".join(f"({s} {_render_term(act.values[s])})" for s in sorted(act.values))
        body = f"{act.type_name} {inner}" if inner else act.type_name
        lines.append(f"  (assert ({body}))")
    return "\n".join(lines) + ")\n"


def print_declarations(types: list[FactType]) -> str:
    if not types:
        return ""
    lines = []
    for t in types:
        slots = " ".join(f"(slot {s} (type {_KIND_UP[k]}))" for s, k in t.slots)
        lines.append(f"(deftemplate {t.name} {slots})")
    return "\n".join(lines) + "\n"


def print_document(types: list[FactType], rules: list[RuleIR]) -> str:
    parts = []
    if types:
        parts.append(print_declarations(types).rstrip("\n"))
    parts.extend(print_rule(r).rstrip("\n") for r in rules)
    return "\n\n".join(parts) + "\n" if parts else ""
