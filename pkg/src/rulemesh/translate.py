"""Dialect-to-dialect translation through the pivot IR.

A document is parsed and lowered in the source dialect, each rule is
canonicalized, and the survivors are printed in the target dialect.  Rules
that cannot cross (grammar defects, constructs outside the shared feature
set) are reported per rule without aborting their siblings.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from . import ir
from .engine import dialect_module
from .ir import Diagnostic, FactType, RuleMeshError

CAPABILITIES = {
    "drl-mini": ("patterns", "guards", "assert"),
    "clips-mini": ("patterns", "guards", "assert", "parse-not"),
}


def capabilities(dialect: str) -> list[str]:
    dialect_module(dialect)
    return list(CAPABILITIES[dialect])


@dataclass
class RuleOutcome:
    rule_name: str | int
    status: str  # "ok" | "error"
    diagnostics: tuple[Diagnostic, ...] = ()

    def to_json(self) -> dict:
        return {
            "rule_name": self.rule_name,
            "status": self.status,
            "diagnostics": [d.to_json() for d in self.diagnostics],
        }


@dataclass
class TranslationReport:
    output_text: str
    per_rule: list[RuleOutcome] = field(default_factory=list)
    declaration_diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.declaration_diagnostics and all(
            r.status == "ok" for r in self.per_rule
        )

    def to_json(self) -> dict:
        return {
            "output_text": self.output_text,
            "per_rule": [r.to_json() for r in self.per_rule],
            "declaration_diagnostics": [d.to_json() for d in self.declaration_diagnostics],
        }


def translate(
    text: str,
    source: str,
    target: str,
    types: list[FactType] | None = None,
) -> TranslationReport:
    """Translate every rule (and any inline declarations) from one dialect to another.

    ``types`` extends the checking context; with ``None`` only type-independent
    checks run, leaving type-level validation to the receiving engine.
    Raises E_GRAMMAR when the document cannot be split into blocks at all;
    every other defect is a per-rule outcome.
    """
    src = dialect_module(source)
    dst = dialect_module(target)
    doc = src.parse_document(text, types)
    if doc.diagnostics:
        first = doc.diagnostics[0]
        raise RuleMeshError(ir.E_GRAMMAR, first.detail, first.line, first.column)

    report = TranslationReport(output_text="")
    declarations: list[FactType] = []
    ok_rules = []
    rule_index = -1
    for block in doc.blocks:
        if block.kind == "declaration":
            if block.ok:
                declarations.append(block.item)
            else:
                report.declaration_diagnostics.extend(block.diagnostics)
            continue
        rule_index += 1
        label = block.name if block.name is not None else rule_index
        if not block.ok:
            report.per_rule.append(RuleOutcome(label, "error", tuple(block.diagnostics)))
            continue
        canonical = ir.canonicalize(block.item)
        try:
            rendered = dst.print_rule(canonical)
        except RuleMeshError as e:
            report.per_rule.append(RuleOutcome(label, "error", (e.to_diagnostic(),)))
            continue
        ok_rules.append((canonical, rendered))
        report.per_rule.append(RuleOutcome(label, "ok"))

    parts = []
    if declarations:
        parts.append(dst.print_declarations(declarations).rstrip("\n"))
    parts.extend(rendered.rstrip("\n") for _, rendered in ok_rules)
    report.output_text = "\n\n".join(parts) + "\n" if parts else ""
    return report
