/**
 * Console state and the pure transitions behind every user action.
 *
 * The clipboard survives navigation between engines and knowledge sets until
 * it is overwritten or cleared; the verdict panel always holds the most
 * recent operation's per-rule results.
 */
import type {
  Diagnostic,
  EngineInfo,
  EngineOutcome,
  FactJson,
  RuleEntry,
  Verdict,
} from "./api.js";

export interface Clipboard {
  text: string;
  sourceDialect: string | null;
  sourceRule: string | null;
}

export interface VerdictPanel {
  operation: string;
  verdicts: Verdict[];
  diagnostics: Diagnostic[];
}

/** Error codes that mean our listing is stale and must be re-fetched. */
const REFRESH_CODES = new Set(["E_DUPLICATE_RULE", "E_NOT_FOUND"]);

export class ConsoleState {
  engines: EngineInfo[] = [];
  selectedEngine: EngineInfo | null = null;
  selectedKs: string | null = null;
  knowledgeSets: string[] = [];
  rules: RuleEntry[] = [];
  selectedRule: RuleEntry | null = null;
  facts: FactJson[] = [];
  clipboard: Clipboard | null = null;
  panel: VerdictPanel | null = null;
  banner: string | null = null;

  setEngines(engines: EngineInfo[]): void {
    this.engines = engines;
    if (this.selectedEngine) {
      this.selectedEngine =
        engines.find((e) => e.id === this.selectedEngine?.id) ?? null;
    }
  }

  selectEngine(engine: EngineInfo | null): void {
    this.selectedEngine = engine;
    this.selectedKs = null;
    this.knowledgeSets = [];
    this.rules = [];
    this.selectedRule = null;
    this.facts = [];
    // clipboard intentionally survives navigation
  }

  selectKnowledgeSet(ks: string | null): void {
    this.selectedKs = ks;
    this.rules = [];
    this.selectedRule = null;
    this.facts = [];
  }

  copyToClipboard(rule: RuleEntry): void {
    this.clipboard = {
      text: rule.text,
      sourceDialect: this.selectedEngine?.dialect ?? null,
      sourceRule: rule.name,
    };
  }

  clearClipboard(): void {
    this.clipboard = null;
  }

  setPanel(operation: string, verdicts: Verdict[], diagnostics: Diagnostic[] = []): void {
    this.panel = { operation, verdicts, diagnostics };
  }

  /** True when writes are allowed: a live engine and a knowledge set selected. */
  canWrite(): boolean {
    return Boolean(this.selectedEngine?.live && this.selectedKs);
  }

  /** Stale-listing detection, per the re-fetch-on-conflict contract. */
  needsRefresh(): boolean {
    if (!this.panel) return false;
    const codes = [
      ...this.panel.diagnostics.map((d) => d.code),
      ...this.panel.verdicts.flatMap((v) => v.diagnostics.map((d) => d.code)),
    ];
    return codes.some((c) => REFRESH_CODES.has(c));
  }
}

/** Flatten a propagated-operation result map into one verdict list for the panel. */
export function flattenOutcomes(
  outcomes: Record<string, EngineOutcome>,
  titleById: (id: string) => string,
): { verdicts: Verdict[]; diagnostics: Diagnostic[] } {
  const verdicts: Verdict[] = [];
  const diagnostics: Diagnostic[] = [];
  for (const [engineId, outcome] of Object.entries(outcomes)) {
    const title = titleById(engineId);
    for (const verdict of outcome.verdicts ?? []) {
      verdicts.push({ ...verdict, rule: `${title}: ${verdict.rule}` });
    }
    if (outcome.error) {
      diagnostics.push({
        code: outcome.error.code,
        detail: `${title}: ${outcome.error.detail}`,
      });
    }
  }
  return { verdicts, diagnostics };
}

export interface FactDiff {
  added: FactJson[];
  kept: FactJson[];
}

function factKey(fact: FactJson): string {
  const slots = Object.keys(fact.values).sort();
  return JSON.stringify([fact.type_name, slots.map((s) => [s, fact.values[s]])]);
}

/** Split an after-run fact list into newly produced and pre-existing facts. */
export function factDiff(before: FactJson[], after: FactJson[]): FactDiff {
  const seen = new Set(before.map(factKey));
  const added: FactJson[] = [];
  const kept: FactJson[] = [];
  for (const fact of after) {
    (seen.has(factKey(fact)) ? kept : added).push(fact);
  }
  return { added, kept };
}

/** A translation preview is committable only when every rule crossed. */
export function previewBlocked(perRule: Array<{ status: string; diagnostics: Diagnostic[] }>): {
  blocked: boolean;
  reasons: Diagnostic[];
} {
  const reasons = perRule
    .filter((r) => r.status !== "ok")
    .flatMap((r) => r.diagnostics);
  return { blocked: reasons.length > 0, reasons };
}

export function formatFact(fact: FactJson): string {
  const inner = Object.keys(fact.values)
    .sort()
    .map((slot) => `${slot}: ${JSON.stringify(fact.values[slot])}`)
    .join(", ");
  return `${fact.type_name}(${inner})`;
}

export function formatDiagnostic(d: Diagnostic): string {
  const where = d.position ? ` (line ${d.position.line}, col ${d.position.column})` : "";
  return `${d.code}: ${d.detail}${where}`;
}
