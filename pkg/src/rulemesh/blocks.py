"""Per-block parse results shared by both dialect front ends.

Documents split into independent top-level blocks (declarations and rules);
a defect in one block never discards its siblings, which is what lets batch
operations report per-rule outcomes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .ir import Diagnostic, FactType, RuleIR


@dataclass
class Block:
    """One top-level unit of a rule document, with its own diagnostics."""

    kind: str  # "declaration" | "rule"
    name: str | None
    text: str
    line: int
    column: int
    item: FactType | RuleIR | None = None
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.item is not None and not self.diagnostics


@dataclass
class ParsedDocument:
    """Declarations, lowered rules, and every diagnostic of one document."""

    blocks: list[Block] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)  # document-level only

    @property
    def declarations(self) -> list[FactType]:
        return [b.item for b in self.blocks if b.kind == "declaration" and b.ok]

    @property
    def rules(self) -> list[RuleIR]:
        return [b.item for b in self.blocks if b.kind == "rule" and b.ok]

    @property
    def all_diagnostics(self) -> list[Diagnostic]:
        out = list(self.diagnostics)
        for b in self.blocks:
            out.extend(b.diagnostics)
        return out
