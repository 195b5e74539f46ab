import { describe, expect, it } from "vitest";

import { GatewayApi, GatewayError } from "../src/api.js";

interface Recorded {
  url: string;
  method: string;
  body?: unknown;
}

function stubFetch(status: number, payload: unknown) {
  const calls: Recorded[] = [];
  const impl = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body as string) : undefined,
    });
    return new Response(JSON.stringify(payload), {
      status,
      headers: { "content-type": "application/json" },
    });
  };
  return { calls, impl };
}

describe("GatewayApi", () => {
  it("lists engines", async () => {
    const { calls, impl } = stubFetch(200, { engines: [{ id: "x", title: "t" }] });
    const api = new GatewayApi("http://gw", impl);
    const engines = await api.engines();
    expect(engines).toEqual([{ id: "x", title: "t" }]);
    expect(calls[0]).toEqual({ url: "http://gw/api/engines", method: "GET", body: undefined });
  });

  it("validates rules against the selected knowledge set", async () => {
    const { calls, impl } = stubFetch(200, { verdicts: [] });
    await new GatewayApi("", impl).validateRules("drl.engine", "demo", ["text"]);
    expect(calls[0]?.url).toBe(
      "/api/engines/drl.engine/knowledge-sets/demo/rules:validate",
    );
    expect(calls[0]?.method).toBe("POST");
    expect(calls[0]?.body).toEqual({ rules: ["text"] });
  });

  it("passes the propagate flag through put and delete", async () => {
    const { calls, impl } = stubFetch(200, { results: {} });
    const api = new GatewayApi("", impl);
    await api.putRules("e", "k", ["r"], false);
    await api.deleteRules("e", "k", ["n"], true);
    expect(calls[0]?.body).toEqual({ engine: "e", ks: "k", rules: ["r"], propagate: false });
    expect(calls[1]?.body).toEqual({ engine: "e", ks: "k", rules: ["n"], propagate: true });
  });

  it("encodes awkward engine and knowledge set names", async () => {
    const { calls, impl } = stubFetch(200, { rules: [] });
    await new GatewayApi("", impl).rules("my engine", "a/b");
    expect(calls[0]?.url).toBe("/api/engines/my%20engine/knowledge-sets/a%2Fb/rules");
  });

  it("wraps structured errors with their code", async () => {
    const { impl } = stubFetch(404, { code: "E_NOT_FOUND", detail: "gone" });
    const api = new GatewayApi("", impl);
    const error = await api.run("e", "k").catch((e: unknown) => e);
    expect(error).toBeInstanceOf(GatewayError);
    expect((error as GatewayError).status).toBe(404);
    expect((error as GatewayError).code).toBe("E_NOT_FOUND");
    expect((error as GatewayError).message).toBe("gone");
  });

  it("sends translate-copy with the documented field names", async () => {
    const { calls, impl } = stubFetch(200, { verdicts: [] });
    await new GatewayApi("", impl).translateCopy("a", "k1", ["adult"], "b", "k2");
    expect(calls[0]?.body).toEqual({
      src_engine: "a",
      src_ks: "k1",
      rule_names: ["adult"],
      dst_engine: "b",
      dst_ks: "k2",
    });
  });
});
