/**
 * Typed client for the gateway JSON API.
 *
 * The console talks to the gateway only; engines and the registry are never
 * addressed directly. Every endpoint used here is listed in
 * GATEWAY_ENDPOINTS so a contract test can check the set against the
 * gateway's own OpenAPI document.
 */

export interface Position {
  line: number;
  column?: number | null;
}

export interface Diagnostic {
  code: string;
  detail: string;
  position?: Position;
}

export interface Verdict {
  rule: string | number;
  status: "valid" | "invalid";
  diagnostics: Diagnostic[];
}

export interface EngineInfo {
  id: string;
  title: string;
  dialect: string | null;
  replica_group: string | null;
  live: boolean;
  last_ping: string;
  links: Record<string, string>;
}

export interface RuleEntry {
  name: string;
  text: string;
}

export type Scalar = string | number | boolean;

export interface FactJson {
  type_name: string;
  values: Record<string, Scalar>;
}

export interface RunReport {
  firings: number;
  new_facts: FactJson[];
  iterations: number;
  diverged: boolean;
}

export interface RuleOutcome {
  rule_name: string | number;
  status: "ok" | "error";
  diagnostics: Diagnostic[];
}

export interface TranslationReport {
  output_text: string;
  per_rule: RuleOutcome[];
  declaration_diagnostics: Diagnostic[];
}

export interface EngineOutcome {
  verdicts?: Verdict[];
  results?: Array<Record<string, unknown>>;
  error?: Diagnostic;
}

/** Endpoints the console is allowed to use (method + path template). */
export const GATEWAY_ENDPOINTS: Array<[string, string]> = [
  ["get", "/api/engines"],
  ["get", "/api/engines/{engine}/knowledge-sets"],
  ["get", "/api/engines/{engine}/knowledge-sets/{ks}/rules"],
  ["post", "/api/engines/{engine}/knowledge-sets/{ks}/rules:validate"],
  ["get", "/api/engines/{engine}/knowledge-sets/{ks}/facts"],
  ["post", "/api/translate"],
  ["post", "/api/put-rules"],
  ["post", "/api/delete-rules"],
  ["post", "/api/translate-copy"],
  ["post", "/api/run"],
];

export class GatewayError extends Error {
  constructor(
    public status: number,
    public payload: { code?: string; detail?: string; engine?: string },
  ) {
    super(payload.detail ?? `gateway returned ${status}`);
  }

  get code(): string {
    return this.payload.code ?? "E_BAD_REQUEST";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class GatewayApi {
  constructor(
    private base: string = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.base + path, init);
    let payload: unknown = null;
    try {
      payload = await response.json();
    } catch {
      payload = {};
    }
    if (!response.ok) {
      throw new GatewayError(response.status, payload as GatewayError["payload"]);
    }
    return payload as T;
  }

  async engines(): Promise<EngineInfo[]> {
    const data = await this.request<{ engines: EngineInfo[] }>("GET", "/api/engines");
    return data.engines;
  }

  async knowledgeSets(engine: string): Promise<string[]> {
    const data = await this.request<{ knowledge_sets: string[] }>(
      "GET",
      `/api/engines/${encodeURIComponent(engine)}/knowledge-sets`,
    );
    return data.knowledge_sets;
  }

  async rules(engine: string, ks: string): Promise<RuleEntry[]> {
    const data = await this.request<{ rules: RuleEntry[] }>(
      "GET",
      `/api/engines/${encodeURIComponent(engine)}/knowledge-sets/${encodeURIComponent(ks)}/rules`,
    );
    return data.rules;
  }

  async validateRules(engine: string, ks: string, rules: string[]): Promise<Verdict[]> {
    const data = await this.request<{ verdicts: Verdict[] }>(
      "POST",
      `/api/engines/${encodeURIComponent(engine)}/knowledge-sets/${encodeURIComponent(ks)}/rules:validate`,
      { rules },
    );
    return data.verdicts;
  }

  async putRules(
    engine: string,
    ks: string,
    rules: string[],
    propagate: boolean,
  ): Promise<Record<string, EngineOutcome>> {
    const data = await this.request<{ results: Record<string, EngineOutcome> }>(
      "POST",
      "/api/put-rules",
      { engine, ks, rules, propagate },
    );
    return data.results;
  }

  async deleteRules(
    engine: string,
    ks: string,
    names: string[],
    propagate: boolean,
  ): Promise<Record<string, EngineOutcome>> {
    const data = await this.request<{ results: Record<string, EngineOutcome> }>(
      "POST",
      "/api/delete-rules",
      { engine, ks, rules: names, propagate },
    );
    return data.results;
  }

  async facts(engine: string, ks: string): Promise<FactJson[]> {
    const data = await this.request<{ facts: FactJson[] }>(
      "GET",
      `/api/engines/${encodeURIComponent(engine)}/knowledge-sets/${encodeURIComponent(ks)}/facts`,
    );
    return data.facts;
  }

  async run(engine: string, ks: string): Promise<RunReport> {
    return this.request<RunReport>("POST", "/api/run", { engine, ks });
  }

  async translate(text: string, from: string, to: string): Promise<TranslationReport> {
    return this.request<TranslationReport>("POST", "/api/translate", { text, from, to });
  }

  async translateCopy(
    srcEngine: string,
    srcKs: string,
    ruleNames: string[],
    dstEngine: string,
    dstKs: string,
  ): Promise<Verdict[]> {
    const data = await this.request<{ verdicts: Verdict[] }>("POST", "/api/translate-copy", {
      src_engine: srcEngine,
      src_ks: srcKs,
      rule_names: ruleNames,
      dst_engine: dstEngine,
      dst_ks: dstKs,
    });
    return data.verdicts;
  }
}
