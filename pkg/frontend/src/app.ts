/**
 * DOM shell of the console: an engine/knowledge-set tree on the left, a rule
 * workspace in the middle, and the verdict panel on the right.  All state
 * shown is re-fetched after every write; nothing is cached across mutations.
 */
import { GatewayApi, GatewayError } from "./api.js";
import type { EngineInfo, RuleEntry, RunReport, TranslationReport } from "./api.js";
import {
  ConsoleState,
  factDiff,
  flattenOutcomes,
  formatDiagnostic,
  formatFact,
  previewBlocked,
} from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: Array<Node | string> = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

export class ConsoleApp {
  readonly state = new ConsoleState();
  private root: HTMLElement;
  private factsBefore: ReturnType<typeof factDiff> | null = null;
  private lastRun: RunReport | null = null;
  private preview: TranslationReport | null = null;
  private previewTarget: { engine: string; ks: string } | null = null;

  constructor(private api: GatewayApi, root: HTMLElement) {
    this.root = root;
  }

  async start(): Promise<void> {
    await this.refreshEngines();
    this.render();
  }

  // --- data fetching (always re-fetch after writes) ---

  private async refreshEngines(): Promise<void> {
    try {
      this.state.setEngines(await this.api.engines());
      this.state.banner = null;
    } catch (err) {
      this.state.banner = err instanceof GatewayError
        ? `${err.code}: ${err.message}`
        : `gateway unreachable: ${String(err)}`;
    }
  }

  private async refreshSelection(): Promise<void> {
    const engine = this.state.selectedEngine;
    if (!engine) return;
    try {
      this.state.knowledgeSets = await this.api.knowledgeSets(engine.title);
      if (this.state.selectedKs) {
        this.state.rules = await this.api.rules(engine.title, this.state.selectedKs);
        this.state.facts = await this.api.facts(engine.title, this.state.selectedKs);
        if (this.state.selectedRule) {
          this.state.selectedRule =
            this.state.rules.find((r) => r.name === this.state.selectedRule?.name) ?? null;
        }
      }
      this.state.banner = null;
    } catch (err) {
      this.reportError("browse", err);
    }
  }

  private reportError(operation: string, err: unknown): void {
    if (err instanceof GatewayError) {
      this.state.setPanel(operation, [], [{ code: err.code, detail: err.message }]);
    } else {
      this.state.banner = `connectivity: ${String(err)}`;
    }
  }

  // --- user actions ---

  async selectEngine(engine: EngineInfo): Promise<void> {
    this.state.selectEngine(engine);
    await this.refreshSelection();
    this.render();
  }

  async selectKnowledgeSet(ks: string): Promise<void> {
    this.state.selectKnowledgeSet(ks);
    await this.refreshSelection();
    this.render();
  }

  selectRule(rule: RuleEntry): void {
    this.state.selectedRule = rule;
    this.render();
  }

  editorText(): string {
    const editor = this.root.querySelector<HTMLTextAreaElement>("#rule-editor");
    return editor?.value ?? "";
  }

  propagate(): boolean {
    const box = this.root.querySelector<HTMLInputElement>("#propagate");
    return box ? box.checked : true;
  }

  async validateEditor(): Promise<void> {
    const { selectedEngine, selectedKs } = this.state;
    if (!selectedEngine || !selectedKs) return;
    try {
      const verdicts = await this.api.validateRules(
        selectedEngine.title, selectedKs, [this.editorText()],
      );
      this.state.setPanel("validate", verdicts);
    } catch (err) {
      this.reportError("validate", err);
    }
    this.render();
  }

  async addFromEditor(): Promise<void> {
    const { selectedEngine, selectedKs } = this.state;
    if (!selectedEngine || !selectedKs || !this.state.canWrite()) return;
    try {
      const outcomes = await this.api.putRules(
        selectedEngine.title, selectedKs, [this.editorText()], this.propagate(),
      );
      const flat = flattenOutcomes(outcomes, (id) => this.titleFor(id));
      this.state.setPanel("add rule", flat.verdicts, flat.diagnostics);
    } catch (err) {
      this.reportError("add rule", err);
    }
    await this.refreshSelection();
    this.render();
  }

  async deleteRule(name: string): Promise<void> {
    const { selectedEngine, selectedKs } = this.state;
    if (!selectedEngine || !selectedKs || !this.state.canWrite()) return;
    try {
      const outcomes = await this.api.deleteRules(
        selectedEngine.title, selectedKs, [name], this.propagate(),
      );
      const flat = flattenOutcomes(outcomes, (id) => this.titleFor(id));
      const diagnostics = flat.diagnostics;
      for (const [engineId, outcome] of Object.entries(outcomes)) {
        for (const result of outcome.results ?? []) {
          if (result["status"] === "error") {
            const error = result["error"] as { code: string; detail: string };
            diagnostics.push({
              code: error.code,
              detail: `${this.titleFor(engineId)}: ${error.detail}`,
            });
          }
        }
      }
      this.state.setPanel("delete rule", flat.verdicts, diagnostics);
    } catch (err) {
      this.reportError("delete rule", err);
    }
    await this.refreshSelection();
    this.render();
  }

  copySelectedRule(): void {
    if (this.state.selectedRule) {
      this.state.copyToClipboard(this.state.selectedRule);
      this.render();
    }
  }

  pasteClipboard(): void {
    const editor = this.root.querySelector<HTMLTextAreaElement>("#rule-editor");
    if (editor && this.state.clipboard) {
      editor.value = this.state.clipboard.text;
    }
  }

  /** Modify = delete the original, then put the edited clipboard text. */
  async modifyFromEditor(): Promise<void> {
    const clipboard = this.state.clipboard;
    const { selectedEngine, selectedKs } = this.state;
    if (!clipboard?.sourceRule || !selectedEngine || !selectedKs) return;
    try {
      await this.api.deleteRules(
        selectedEngine.title, selectedKs, [clipboard.sourceRule], this.propagate(),
      );
      const outcomes = await this.api.putRules(
        selectedEngine.title, selectedKs, [this.editorText()], this.propagate(),
      );
      const flat = flattenOutcomes(outcomes, (id) => this.titleFor(id));
      this.state.setPanel("modify rule", flat.verdicts, flat.diagnostics);
    } catch (err) {
      this.reportError("modify rule", err);
    }
    await this.refreshSelection();
    this.render();
  }

  async previewTranslate(dstEngineTitle: string, dstKs: string): Promise<void> {
    const rule = this.state.selectedRule;
    const source = this.state.selectedEngine;
    const destination = this.state.engines.find((e) => e.title === dstEngineTitle);
    if (!rule || !source?.dialect || !destination?.dialect) return;
    try {
      this.preview = await this.api.translate(rule.text, source.dialect, destination.dialect);
      this.previewTarget = { engine: dstEngineTitle, ks: dstKs };
    } catch (err) {
      this.reportError("translate preview", err);
    }
    this.render();
  }

  async commitTranslate(): Promise<void> {
    const rule = this.state.selectedRule;
    const source = this.state.selectedEngine;
    const target = this.previewTarget;
    if (!rule || !source || !this.state.selectedKs || !target || !this.preview) return;
    if (previewBlocked(this.preview.per_rule).blocked) return;
    try {
      const verdicts = await this.api.translateCopy(
        source.title, this.state.selectedKs, [rule.name], target.engine, target.ks,
      );
      this.state.setPanel("translate rule", verdicts);
      this.preview = null;
      this.previewTarget = null;
    } catch (err) {
      this.reportError("translate rule", err);
    }
    await this.refreshSelection();
    this.render();
  }

  async runSelected(): Promise<void> {
    const { selectedEngine, selectedKs } = this.state;
    if (!selectedEngine || !selectedKs || !this.state.canWrite()) return;
    try {
      const before = this.state.facts;
      this.lastRun = await this.api.run(selectedEngine.title, selectedKs);
      await this.refreshSelection();
      this.factsBefore = factDiff(before, this.state.facts);
    } catch (err) {
      this.reportError("run", err);
    }
    this.render();
  }

  private titleFor(engineId: string): string {
    return this.state.engines.find((e) => e.id === engineId)?.title ?? engineId;
  }

  // --- rendering ---

  render(): void {
    // The workspace is rebuilt wholesale; carry the operator's draft over.
    const draft = this.root.querySelector<HTMLTextAreaElement>("#rule-editor")?.value;
    const propagate = this.root.querySelector<HTMLInputElement>("#propagate")?.checked;
    this.root.replaceChildren(
      this.renderBanner(),
      el("div", { class: "columns" }, [
        this.renderTree(),
        this.renderWorkspace(),
        this.renderPanel(),
      ]),
    );
    const editor = this.root.querySelector<HTMLTextAreaElement>("#rule-editor");
    if (editor && draft !== undefined) editor.value = draft;
    const box = this.root.querySelector<HTMLInputElement>("#propagate");
    if (box && propagate !== undefined) box.checked = propagate;
  }

  private renderBanner(): HTMLElement {
    if (!this.state.banner) return el("div", { class: "banner hidden" });
    return el("div", { class: "banner error" }, [this.state.banner]);
  }

  private renderTree(): HTMLElement {
    const engines = this.state.engines.map((engine) => {
      const classes = ["engine"];
      if (!engine.live) classes.push("dead");
      if (engine.id === this.state.selectedEngine?.id) classes.push("selected");
      const label = engine.live
        ? `${engine.title} [${engine.dialect ?? "?"}]`
        : `${engine.title} [down, last ping ${engine.last_ping}]`;
      const node = el("li", { class: classes.join(" "), "data-engine": engine.title }, [label]);
      node.addEventListener("click", () => void this.selectEngine(engine));
      if (engine.id === this.state.selectedEngine?.id) {
        const kss = this.state.knowledgeSets.map((ks) => {
          const ksNode = el(
            "li",
            { class: ks === this.state.selectedKs ? "ks selected" : "ks", "data-ks": ks },
            [ks],
          );
          ksNode.addEventListener("click", (event) => {
            event.stopPropagation();
            void this.selectKnowledgeSet(ks);
          });
          return ksNode;
        });
        node.append(el("ul", { class: "ks-list" }, kss));
      }
      return node;
    });
    return el("nav", { class: "tree" }, [
      el("h2", {}, ["Engines"]),
      el("ul", { class: "engine-list" }, engines),
    ]);
  }

  private renderWorkspace(): HTMLElement {
    const parts: HTMLElement[] = [el("h2", {}, ["Rules"])];
    if (!this.state.selectedKs) {
      parts.push(el("p", { class: "hint" }, ["Select an engine and a knowledge set."]));
      return el("section", { class: "workspace" }, parts);
    }
    const rules = this.state.rules.map((rule) => {
      const item = el(
        "li",
        {
          class: rule.name === this.state.selectedRule?.name ? "rule selected" : "rule",
          "data-rule": rule.name,
        },
        [rule.name],
      );
      item.addEventListener("click", () => this.selectRule(rule));
      const remove = el("button", { class: "delete", title: "Delete rule" }, ["x"]);
      remove.addEventListener("click", (event) => {
        event.stopPropagation();
        void this.deleteRule(rule.name);
      });
      item.append(remove);
      return item;
    });
    parts.push(el("ul", { class: "rule-list" }, rules));

    if (this.state.selectedRule) {
      parts.push(
        el("pre", { class: "rule-text", id: "rule-text" }, [this.state.selectedRule.text]),
      );
      const copy = el("button", { id: "copy-rule" }, ["Copy to clipboard"]);
      copy.addEventListener("click", () => this.copySelectedRule());
      parts.push(copy);
      parts.push(this.renderTranslate());
    }

    parts.push(el("h3", {}, ["Editor"]));
    const editor = el("textarea", { id: "rule-editor", rows: "10" });
    parts.push(editor);
    const controls = el("div", { class: "editor-controls" });
    const propagate = el("input", { type: "checkbox", id: "propagate" });
    propagate.checked = true;
    controls.append(
      el("label", {}, [propagate, " propagate to replicas"]),
    );
    const writable = this.state.canWrite();
    for (const [id, label, handler] of [
      ["validate-rule", "Validate", () => void this.validateEditor()],
      ["add-rule", "Add rule", () => void this.addFromEditor()],
      ["modify-rule", "Modify (replace clipboard source)", () => void this.modifyFromEditor()],
      ["paste-clipboard", "Paste clipboard", () => this.pasteClipboard()],
    ] as const) {
      const button = el("button", { id });
      button.textContent = label;
      if (!writable && id !== "paste-clipboard") button.disabled = true;
      button.addEventListener("click", handler);
      controls.append(button);
    }
    parts.push(controls);
    if (this.state.clipboard) {
      parts.push(
        el("p", { class: "clipboard-info" }, [
          `clipboard: ${this.state.clipboard.sourceRule ?? "(text)"}`
          + ` from ${this.state.clipboard.sourceDialect ?? "unknown dialect"}`,
        ]),
      );
    }

    parts.push(this.renderRun());
    return el("section", { class: "workspace" }, parts);
  }

  private renderTranslate(): HTMLElement {
    const container = el("div", { class: "translate" }, [el("h3", {}, ["Translate rule"])]);
    const targets = this.state.engines.filter(
      (e) => e.live && e.id !== this.state.selectedEngine?.id,
    );
    const select = el("select", { id: "translate-target" });
    for (const target of targets) {
      select.append(el("option", { value: target.title }, [target.title]));
    }
    const ksInput = el("input", { id: "translate-ks", value: this.state.selectedKs ?? "" });
    const previewButton = el("button", { id: "preview-translate" }, ["Preview"]);
    previewButton.addEventListener("click", () => {
      if (select.value) void this.previewTranslate(select.value, ksInput.value);
    });
    container.append(
      el("label", {}, ["to engine ", select]),
      el("label", {}, ["knowledge set ", ksInput]),
      previewButton,
    );
    if (this.preview) {
      const { blocked, reasons } = previewBlocked(this.preview.per_rule);
      if (blocked) {
        container.append(
          el("div", { class: "preview blocked", id: "translate-preview" },
            reasons.map((d) => el("p", { class: "diag" }, [formatDiagnostic(d)]))),
        );
      } else {
        container.append(
          el("pre", { class: "preview", id: "translate-preview" }, [this.preview.output_text]),
        );
        const commit = el("button", { id: "commit-translate" }, ["Copy to destination"]);
        commit.addEventListener("click", () => void this.commitTranslate());
        container.append(commit);
      }
    }
    return container;
  }

  private renderRun(): HTMLElement {
    const container = el("div", { class: "run" }, [el("h3", {}, ["Working memory"])]);
    const runButton = el("button", { id: "run-rules" }, ["Run"]);
    if (!this.state.canWrite()) runButton.disabled = true;
    runButton.addEventListener("click", () => void this.runSelected());
    container.append(runButton);
    if (this.lastRun) {
      container.append(
        el("p", { id: "run-report" }, [
          `${this.lastRun.firings} firings in ${this.lastRun.iterations} sweeps`,
        ]),
      );
    }
    const added = new Set((this.factsBefore?.added ?? []).map(formatFact));
    const rows = this.state.facts.map((fact) => {
      const text = formatFact(fact);
      return el("li", { class: added.has(text) ? "fact new" : "fact" }, [text]);
    });
    container.append(el("ul", { class: "fact-list" }, rows));
    return container;
  }

  private renderPanel(): HTMLElement {
    const parts: Array<Node | string> = [el("h2", {}, ["Verdicts"])];
    const panel = this.state.panel;
    if (panel) {
      parts.push(el("h3", {}, [panel.operation]));
      for (const verdict of panel.verdicts) {
        const classes = verdict.status === "valid" ? "verdict valid" : "verdict invalid";
        const detail = verdict.diagnostics.map((d) => el("p", { class: "diag" }, [
          formatDiagnostic(d),
        ]));
        parts.push(
          el("div", { class: classes }, [
            el("strong", {}, [String(verdict.rule)]),
            ` ${verdict.status}`,
            ...detail,
          ]),
        );
      }
      for (const diagnostic of panel.diagnostics) {
        parts.push(el("p", { class: "diag" }, [formatDiagnostic(diagnostic)]));
      }
      if (this.state.needsRefresh()) {
        parts.push(el("p", { class: "hint" }, ["listing was stale; re-fetched"]));
      }
    } else {
      parts.push(el("p", { class: "hint" }, ["No operation yet."]));
    }
    return el("aside", { class: "panel", id: "verdict-panel" }, parts);
  }
}

export function mountConsole(api: GatewayApi, root: HTMLElement): ConsoleApp {
  return new ConsoleApp(api, root);
}
