import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";

interface Recorded {
  url: string;
  init?: RequestInit;
}

function stubFetch(status: number, body: unknown) {
  const calls: Recorded[] = [];
  const impl = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => body,
    } as Response;
  };
  return { impl, calls };
}

describe("api client", () => {
  it("builds event queries with repeated filter params", async () => {
    const { impl, calls } = stubFetch(200, { items: [], next_cursor: null, total: 0 });
    const api = new ApiClient("http://api", "tok", impl);
    await api.events({ priority: ["Emergency", "Urgent"], session: ["s1"], period: "Day" });
    expect(calls[0].url).toBe(
      "http://api/events?priority=Emergency&priority=Urgent&session=s1&period=Day",
    );
    const headers = calls[0].init?.headers as Record<string, string>;
    expect(headers["Authorization"]).toBe("Bearer tok");
  });

  it("omits the auth header without a token", async () => {
    const { impl, calls } = stubFetch(200, { items: [], next_cursor: null, total: 0 });
    const api = new ApiClient("http://api", null, impl);
    await api.sessions();
    const headers = calls[0].init?.headers as Record<string, string>;
    expect(headers["Authorization"]).toBeUndefined();
  });

  it("posts search bodies as JSON", async () => {
    const { impl, calls } = stubFetch(200, { matches: [] });
    const api = new ApiClient("http://api", "tok", impl);
    await api.search({ entity_class: "Person", include: { shirt_color: ["red"] }, exclude: {} });
    expect(calls[0].init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({
      entity_class: "Person",
      include: { shirt_color: ["red"] },
      exclude: {},
    });
  });

  it("surfaces the server's machine-readable error message", async () => {
    const { impl } = stubFetch(400, {
      error: { code: "validation_error", message: "unconstrained query" },
    });
    const api = new ApiClient("http://api", "tok", impl);
    await expect(
      api.search({ entity_class: "Person", include: {}, exclude: {} }),
    ).rejects.toThrow(/unconstrained query/);
  });

  it("encodes path parameters", async () => {
    const { impl, calls } = stubFetch(200, { matches: [] });
    const api = new ApiClient("http://api", null, impl);
    await api.similar("s1:p3");
    expect(calls[0].url).toBe("http://api/entities/s1%3Ap3/similar");
  });
});
