"""drl-mini: a strict miniature of a DRL-like rule language.

Grammar (authoritative):

    doc      := (decl | rule)*
    decl     := "declare" IDENT (IDENT ":" ("string"|"integer"|"boolean"))+ "end"
    rule     := "rule" STRING "when" pattern+ "then" action+ "end"
    pattern  := IDENT "(" constraint ("," constraint)* ")"
    constraint := IDENT ":" VAR | IDENT OP (literal | VAR)
    action   := "insert" IDENT "(" IDENT ":" (literal | VAR) ("," IDENT ":" (literal|VAR))* ")" ";"
    OP       := "==" | "!=" | "<" | "<=" | ">" | ">="
    VAR      := "$" IDENT ;  literal := STRING | INT | "true" | "false"

Line comments start with ``//``; whitespace is free-form outside strings.
Inequality constraints lower to guards over a fresh synthetic variable when
the slot has no binding yet, otherwise they reuse the slot's bound variable.
"""
from __future__ import annotations

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

DIALECT_ID = "drl-mini"

_KEYWORDS = {"declare", "rule", "when", "then", "insert", "end", "true", "false"}
_PUNCT = ("==", "!=", "<=", ">=", "<", ">", "(", ")", ",", ":", ";")


@dataclass(frozen=True)
class Token:
    kind: str  # ident | var | string | int | kw | punct | eof
    value: str | int
    line: int
    column: int
    start: int
    end: int


class _LexError(Exception):
    def __init__(self, msg: str, line: int, column: int):
        super().__init__(msg)
        self.msg = msg
        self.line = line
        self.column = column


# The grammar is ASCII; str.isdigit/isalpha would admit unicode lookalikes.
def _is_digit(c: str) -> bool:
    return "0" <= c <= "9"


def _is_ident_start(c: str) -> bool:
    return "a" <= c <= "z" or "A" <= c <= "Z" or c == "_"


def _is_ident_char(c: str) -> bool:
    return _is_ident_start(c) or _is_digit(c)


class _ParseError(Exception):
    def __init__(self, msg: str, token: Token):
        super().__init__(msg)
        self.msg = msg
        self.token = token


def _read_string(text: str, i: int, line: int, col: int) -> tuple[str, int]:
    out = []
    j = i + 1
    while j < len(text):
        c = text[j]
        if c == "\\":
            if j + 1 < len(text) and text[j + 1] in ('"', "\\"):
                out.append(text[j + 1])
                j += 2
                continue
            raise _LexError("bad escape in string literal", line, col)
        if c == '"':
            return "".join(out), j + 1
        if c == "\n":
            break
        out.append(c)
        j += 1
    raise _LexError("unterminated string literal", line, col)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
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
        if text.startswith("//", i):
            j = text.find("\n", i)
            j = n if j < 0 else j
            col += j - i
            i = j
            continue
        start, sline, scol = i, line, col
        if c == '"':
            value, j = _read_string(text, i, line, col)
            tokens.append(Token("string", value, sline, scol, start, j))
            col += j - i
            i = j
            continue
        if c == "$":
            j = i + 1
            while j < n and _is_ident_char(text[j]):
                j += 1
            name = text[i + 1 : j]
            if not ir.IDENT_RE.match(name or ""):
                raise _LexError("expected identifier after '$'", sline, scol)
            tokens.append(Token("var", name, sline, scol, start, j))
            col += j - i
            i = j
            continue
        if _is_digit(c) or (c == "-" and i + 1 < n and _is_digit(text[i + 1])):
            j = i + 1
            while j < n and _is_digit(text[j]):
                j += 1
            value = int(text[i:j])
            if not (ir.INT64_MIN <= value <= ir.INT64_MAX):
                raise _LexError("integer literal out of 64-bit range", sline, scol)
            tokens.append(Token("int", value, sline, scol, start, j))
            col += j - i
            i = j
            continue
        if _is_ident_start(c):
            j = i + 1
            while j < n and _is_ident_char(text[j]):
                j += 1
            word = text[i:j]
            kind = "kw" if word in _KEYWORDS else "ident"
            tokens.append(Token(kind, word, sline, scol, start, j))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                tokens.append(Token("punct", p, sline, scol, start, i + len(p)))
                col += len(p)
                i += len(p)
                break
        else:
            raise _LexError(f"unexpected character {c!r}", sline, scol)
    tokens.append(Token("eof", "", line, col, n, n))
    return tokens


class _Cursor:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, kind: str, value=None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (value is not None and tok.value != value):
            want = value if value is not None else kind
            got = repr(tok.value) if tok.kind != "eof" else "end of input"
            raise _ParseError(f"expected {want}, got {got}", tok)
        return self.next()


def _grammar(msg: str, tok: Token) -> Diagnostic:
    return Diagnostic(ir.E_GRAMMAR, msg, tok.line, tok.column)


def _split_blocks(tokens: list[Token]) -> tuple[list[tuple[str, list[Token]]], list[Diagnostic]]:
    """Cut the token stream into declare/rule spans; stray tokens become diagnostics."""
    spans: list[tuple[str, list[Token]]] = []
    diags: list[Diagnostic] = []
    i = 0
    while tokens[i].kind != "eof":
        tok = tokens[i]
        if tok.kind == "kw" and tok.value in ("declare", "rule"):
            j = i + 1
            closed = False
            while tokens[j].kind != "eof":
                t = tokens[j]
                if t.kind == "kw" and t.value == "end":
                    j += 1
                    closed = True
                    break
                if t.kind == "kw" and t.value in ("declare", "rule"):
                    break
                j += 1
            span = tokens[i:j]
            if not closed:
                spans.append((tok.value, span + [_missing_end(span)]))
            else:
                spans.append((tok.value, span))
            i = j
        else:
            diags.append(_grammar("expected 'declare' or 'rule'", tok))
            i += 1
            while tokens[i].kind != "eof" and not (
                tokens[i].kind == "kw" and tokens[i].value in ("declare", "rule")
            ):
                i += 1
    return spans, diags


def _missing_end(span: list[Token]) -> Token:
    last = span[-1]
    return Token("eof", "", last.line, last.column, last.end, last.end)


def _parse_literal(cur: _Cursor) -> Const:
    tok = cur.peek()
    if tok.kind == "string":
        return Const(cur.next().value)
    if tok.kind == "int":
        return Const(cur.next().value)
    if tok.kind == "kw" and tok.value in ("true", "false"):
        cur.next()
        return Const(tok.value == "true")
    raise _ParseError(f"expected literal, got {tok.value!r}", tok)


def _parse_decl(cur: _Cursor) -> FactType:
    cur.expect("kw", "declare")
    name_tok = cur.expect("ident")
    slots: list[tuple[str, str]] = []
    seen: set[str] = set()
    while cur.peek().kind == "ident":
        slot_tok = cur.next()
        cur.expect("punct", ":")
        kind_tok = cur.peek()
        if kind_tok.kind != "ident" or kind_tok.value not in ir.KINDS:
            raise _ParseError(
                f"expected slot kind (string, integer or boolean), got {kind_tok.value!r}",
                kind_tok,
            )
        cur.next()
        if slot_tok.value in seen:
            raise _ParseError(f"duplicate slot {slot_tok.value!r}", slot_tok)
        seen.add(slot_tok.value)
        slots.append((slot_tok.value, kind_tok.value))
    if not slots:
        raise _ParseError("a declaration needs at least one slot", cur.peek())
    cur.expect("kw", "end")
    return FactType(name_tok.value, tuple(slots))


def _parse_rule(cur: _Cursor, types: list[FactType] | None) -> tuple[RuleIR, list[Diagnostic]]:
    cur.expect("kw", "rule")
    name_tok = cur.expect("string")
    cur.expect("kw", "when")

    user_vars = {t.value for t in cur.tokens if t.kind == "var"}
    lower = SlotLowerer(user_vars)
    diags: list[Diagnostic] = []

    patterns: list[Pattern] = []
    if cur.peek().kind == "kw" and cur.peek().value == "then":
        raise _ParseError("empty condition: at least one pattern required", cur.peek())
    while cur.peek().kind == "ident":
        type_tok = cur.next()
        cur.expect("punct", "(")
        state: dict[str, tuple[str, Const | Var]] = {}
        while True:
            slot_tok = cur.expect("ident")
            sep = cur.peek()
            if sep.kind == "punct" and sep.value == ":":
                cur.next()
                var_tok = cur.expect("var")
                lower.constrain(state, slot_tok.value, "bind", None, Var(var_tok.value))
            elif sep.kind == "punct" and sep.value in ir.OPS:
                cur.next()
                rhs: Term
                if cur.peek().kind == "var":
                    rhs = Var(cur.next().value)
                else:
                    rhs = _parse_literal(cur)
                lower.constrain(state, slot_tok.value, "op", sep.value, rhs)
            else:
                raise _ParseError(f"expected ':' or comparison operator, got {sep.value!r}", sep)
            nxt = cur.peek()
            if nxt.kind == "punct" and nxt.value == ",":
                cur.next()
                continue
            cur.expect("punct", ")")
            break
        slot_eq, slot_bind = split_state(state)
        patterns.append(Pattern(type_tok.value, slot_eq, slot_bind))

    cur.expect("kw", "then")
    actions: list[AssertAction] = []
    if cur.peek().kind == "kw" and cur.peek().value == "end":
        raise _ParseError("empty action list: at least one insert required", cur.peek())
    while cur.peek().kind == "kw" and cur.peek().value == "insert":
        cur.next()
        type_tok = cur.expect("ident")
        cur.expect("punct", "(")
        values: dict[str, Term] = {}
        while True:
            slot_tok = cur.expect("ident")
            cur.expect("punct", ":")
            term: Term
            if cur.peek().kind == "var":
                term = Var(cur.next().value)
            else:
                term = _parse_literal(cur)
            if slot_tok.value in values:
                diags.append(
                    Diagnostic(
                        ir.E_INCOMPLETE_ACTION,
                        f"slot {slot_tok.value!r} listed twice in assert",
                        slot_tok.line,
                        slot_tok.column,
                    )
                )
            else:
                values[slot_tok.value] = term
            nxt = cur.peek()
            if nxt.kind == "punct" and nxt.value == ",":
                cur.next()
                continue
            cur.expect("punct", ")")
            break
        cur.expect("punct", ";")
        actions.append(AssertAction(type_tok.value, values))
    cur.expect("kw", "end")

    rule = RuleIR(name_tok.value, tuple(patterns), tuple(lower.guards), tuple(actions))
    diags.extend(ir.check(rule, types))
    return rule, diags


def parse_document(text: str, types: list[FactType] | None = None,
                   rules: str = "parse") -> ParsedDocument:
    """Parse a whole document.  ``rules`` is "parse", "skip" or "reject"."""
    doc = ParsedDocument()
    try:
        tokens = tokenize(text)
    except _LexError as e:
        doc.diagnostics.append(Diagnostic(ir.E_GRAMMAR, e.msg, e.line, e.column))
        return doc
    spans, stray = _split_blocks(tokens)
    doc.diagnostics.extend(stray)

    def block_text(span: list[Token]) -> str:
        return text[span[0].start : span[-1].end].strip()

    typed = types is not None
    context = list(types) if typed else []
    decl_blocks: list[Block] = []
    for kind, span in spans:
        if kind != "declare":
            continue
        first = span[0]
        block = Block("declaration", None, block_text(span), first.line, first.column)
        try:
            ftype = _parse_decl(_Cursor(span + [_missing_end(span)]))
            block.item = ftype
            block.name = ftype.name
            context = [t for t in context if t.name != ftype.name] + [ftype]
        except _ParseError as e:
            block.diagnostics.append(_grammar(e.msg, e.token))
        decl_blocks.append(block)

    by_span = iter(decl_blocks)
    for kind, span in spans:
        if kind == "declare":
            doc.blocks.append(next(by_span))
            continue
        first = span[0]
        if rules == "skip":
            continue
        block = Block("rule", None, block_text(span), first.line, first.column)
        if rules == "reject":
            block.diagnostics.append(_grammar("only declarations are allowed here", first))
            doc.blocks.append(block)
            continue
        name_tok = span[1] if len(span) > 1 and span[1].kind == "string" else None
        block.name = name_tok.value if name_tok else None
        try:
            rule, rdiags = _parse_rule(
                _Cursor(span + [_missing_end(span)]), context if typed else None
            )
            block.name = rule.name
            block.diagnostics.extend(rdiags)
            if not rdiags:
                block.item = rule
        except _ParseError as e:
            block.diagnostics.append(_grammar(e.msg, e.token))
        doc.blocks.append(block)
    return doc


def parse_declarations(text: str) -> tuple[list[FactType], list[Diagnostic]]:
    doc = parse_document(text, rules="skip")
    return doc.declarations, doc.all_diagnostics


def parse_rules(text: str, types: list[FactType]) -> tuple[list[RuleIR], list[Diagnostic]]:
    doc = parse_document(text, types)
    return doc.rules, doc.all_diagnostics


# --- printing ---


def _require_printable(rule: RuleIR) -> None:
    for pat in rule.patterns:
        if not pat.slot_eq and not pat.slot_bind:
            raise RuleMeshError(
                ir.E_UNPRINTABLE,
                f"pattern {pat.type_name!r} has no constraints; drl-mini cannot express it",
            )
    bound = {v.name for p in rule.patterns for v in p.slot_bind.values()}
    for g in rule.guards:
        if g.lhs.name not in bound:
            raise RuleMeshError(ir.E_UNPRINTABLE, f"guard variable ${g.lhs.name} is unbound")


def _var_usage(rule: RuleIR):
    bindings: dict[str, list[tuple[int, str]]] = {}
    for i, pat in enumerate(rule.patterns):
        for slot in sorted(pat.slot_bind):
            bindings.setdefault(pat.slot_bind[slot].name, []).append((i, slot))
    rhs_or_action: set[str] = set()
    for g in rule.guards:
        if isinstance(g.rhs, Var):
            rhs_or_action.add(g.rhs.name)
    for act in rule.actions:
        for term in act.values.values():
            if isinstance(term, Var):
                rhs_or_action.add(term.name)
    return bindings, rhs_or_action


def print_rule(rule: RuleIR) -> str:
    """Deterministic drl-mini text.

    A variable bound once and used only as a guard's left side is absorbed:
    its binding is not printed and its guards appear as inline constraints on
    the binding slot (``age >= 18``).  Every other guard prints inline on the
    pattern that first binds its left side.
    """
    _require_printable(rule)
    bindings, rhs_or_action = _var_usage(rule)
    guards_by_var: dict[str, list[Guard]] = {}
    for g in rule.guards:
        guards_by_var.setdefault(g.lhs.name, []).append(g)

    def absorbed(name: str) -> bool:
        # An absorbed '==' guard would re-parse as slot_eq (or as a binding,
        # for a variable rhs), changing the lowered form; keep those explicit.
        return (
            len(bindings[name]) == 1
            and name in guards_by_var
            and name not in rhs_or_action
            and all(g.op != "==" for g in guards_by_var[name])
        )

    lines = [f'rule "{_escape(rule.name)}"', "when"]
    for i, pat in enumerate(rule.patterns):
        parts: list[str] = []
        for slot in sorted(set(pat.slot_eq) | set(pat.slot_bind)):
            if slot in pat.slot_eq:
                parts.append(f"{slot} == {ir.render_const(pat.slot_eq[slot])}")
                continue
            var = pat.slot_bind[slot]
            if not absorbed(var.name):
                parts.append(f"{slot} : ${var.name}")
            if bindings[var.name][0] == (i, slot):
                for g in guards_by_var.get(var.name, ()):
                    parts.append(f"{slot} {g.op} {_render_rhs(g.rhs)}")
        lines.append(f"  {pat.type_name}({', '.join(parts)})")
    lines.append("then")
    for act in rule.actions:
        inner = ", ".join(f"{s}: {_render_rhs(act.values[s])}" for s in sorted(act.values))
        lines.append(f"  insert {act.type_name}({inner});")
    lines.append("end")
    return "\n".join(lines) + "\n"


def _render_rhs(term: Term) -> str:
    if isinstance(term, Var):
        return f"${term.name}"
    return ir.render_const(term)


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def print_declarations(types: list[FactType]) -> str:
    if not types:
        return ""
    blocks = []
    for t in types:
        lines = [f"declare {t.name}"]
        lines.extend(f" {slot}: {kind}" for slot, kind in t.slots)
        lines.append("end")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def print_document(types: list[FactType], rules: list[RuleIR]) -> str:
    parts = []
    if types:
        parts.append(print_declarations(types).rstrip("\n"))
    parts.extend(print_rule(r).rstrip("\n") for r in rules)
    return "\n\n".join(parts) + "\n" if parts else ""
