/**
 * Console against a live gateway: the full operator loop on the adult-rule
 * fixture, plus the endpoint contract check against the gateway's OpenAPI.
 */
import { JSDOM } from "jsdom";
import { afterAll, beforeAll, describe, expect, inject, it } from "vitest";

import { GATEWAY_ENDPOINTS, GatewayApi } from "../src/api.js";
import { ConsoleApp } from "../src/app.js";

const ADULT_TEXT =
  'rule "adult"\nwhen\n  Person(age >= 18, name : $n)\nthen\n  insert Adult(name: $n);\nend';
const NOT_TEXT =
  '(defrule shy (not (Person (age 1))) => (assert (Adult (name "x"))))';

const gatewayUrl = inject("gatewayUrl");

let dom: JSDOM;
let app: ConsoleApp;

beforeAll(async () => {
  dom = new JSDOM('<main id="app"></main>');
  globalThis.document = dom.window.document as unknown as Document;
  const api = new GatewayApi(gatewayUrl, (input, init) => fetch(input, init));
  app = new ConsoleApp(api, dom.window.document.getElementById("app") as HTMLElement);
  await app.start();
});

afterAll(() => {
  // @ts-expect-error cleanup of the injected global
  delete globalThis.document;
});

function panelText(): string {
  return dom.window.document.getElementById("verdict-panel")?.textContent ?? "";
}

describe("console against a live gateway", () => {
  it("lists both engines in the tree", () => {
    const titles = [...dom.window.document.querySelectorAll("li.engine")].map(
      (node) => node.textContent ?? "",
    );
    expect(titles.some((t) => t.includes("drl.engine"))).toBe(true);
    expect(titles.some((t) => t.includes("clips.engine"))).toBe(true);
    expect(app.state.engines.every((e) => e.live)).toBe(true);
  });

  it("adds, validates, translates, and deletes the adult rule with verdicts rendered", async () => {
    const drl = app.state.engines.find((e) => e.title === "drl.engine")!;
    await app.selectEngine(drl);
    await app.selectKnowledgeSet("demo");

    // validate first: the editor text is checked without installing anything
    dom.window.document.querySelector<HTMLTextAreaElement>("#rule-editor")!.value = ADULT_TEXT;
    await app.validateEditor();
    expect(panelText()).toContain("valid");
    expect(app.state.rules).toHaveLength(0);

    // add (propagation on by default: the clips replica receives a translation)
    await app.addFromEditor();
    expect(app.state.rules.map((r) => r.name)).toEqual(["adult"]);
    expect(panelText()).toContain("drl.engine: adult");
    expect(panelText()).toContain("clips.engine: adult");

    // translate preview to the clips engine, then commit a copy
    app.selectRule(app.state.rules[0]!);
    await app.previewTranslate("clips.engine", "demo");
    const preview = dom.window.document.getElementById("translate-preview");
    expect(preview?.textContent).toContain("(defrule adult");
    // the replica already holds "adult" via propagation: commit surfaces the collision
    await app.commitTranslate();
    expect(panelText()).toContain("E_DUPLICATE_RULE");
    expect(app.state.needsRefresh()).toBe(true);

    // run and inspect: Adult(ann) appears highlighted after asserting a fact
    const api = new GatewayApi(gatewayUrl, (input, init) => fetch(input, init));
    const putFacts = await fetch(
      `${gatewayUrl}/api/engines/drl.engine/knowledge-sets/demo/facts`,
      {
        method: "PUT",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({
          facts: [{ type_name: "Person", values: { name: "ann", age: 20 } }],
        }),
      },
    );
    expect(putFacts.ok).toBe(true);
    await app.runSelected();
    const highlighted = [...dom.window.document.querySelectorAll("li.fact.new")].map(
      (node) => node.textContent,
    );
    expect(highlighted).toContain('Adult(name: "ann")');

    // delete (propagated) and confirm the listing refreshes empty on both sides
    await app.deleteRule("adult");
    expect(app.state.rules).toHaveLength(0);
    const clipsRules = await api.rules("clips.engine", "demo");
    expect(clipsRules).toHaveLength(0);
  });

  it("blocks the translate preview of a `not` rule with E_UNSUPPORTED", async () => {
    const clips = app.state.engines.find((e) => e.title === "clips.engine")!;
    await app.selectEngine(clips);
    await app.selectKnowledgeSet("demo");
    // stage an un-lowerable rule as the selected source text
    app.state.rules = [{ name: "shy", text: NOT_TEXT }];
    app.selectRule(app.state.rules[0]!);
    await app.previewTranslate("drl.engine", "demo");
    const preview = dom.window.document.getElementById("translate-preview");
    expect(preview?.classList.contains("blocked")).toBe(true);
    expect(preview?.textContent).toContain("E_UNSUPPORTED");
    expect(preview?.textContent).toContain("not");
    expect(dom.window.document.getElementById("commit-translate")).toBeNull();
  });

  it("uses only endpoints the gateway documents", async () => {
    const response = await fetch(`${gatewayUrl}/openapi.json`);
    const spec = (await response.json()) as {
      paths: Record<string, Record<string, unknown>>;
    };
    for (const [method, path] of GATEWAY_ENDPOINTS) {
      const documented = spec.paths[path];
      expect(documented, `${method.toUpperCase()} ${path} missing`).toBeDefined();
      expect(Object.keys(documented!)).toContain(method);
    }
  });
});
