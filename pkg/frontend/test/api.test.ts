/** Gateway client request shapes and the marketplace POST-back form. */

import { describe, expect, it } from "vitest";

import { ApiError, GatewayClient, submitFormHtml } from "../src/api.js";

type Call = { url: string; method?: string; headers?: Record<string, string>; body?: string };

function stubFetch(status: number, payload: unknown) {
  const calls: Call[] = [];
  const impl = async (url: string, init?: any) => {
    calls.push({ url, ...init });
    return {
      status,
      json: async () => payload,
      text: async () => JSON.stringify(payload),
    };
  };
  return { calls, impl };
}

describe("GatewayClient", () => {
  it("sends bearer auth on requester routes", async () => {
    const { calls, impl } = stubFetch(200, { name: "p", version: 1 });
    const client = new GatewayClient("http://api.test/", "secret-token", impl);
    await client.getPipeline("p");
    expect(calls[0].url).toBe("http://api.test/api/v1/pipelines/p");
    expect(calls[0].headers!["Authorization"]).toBe("Bearer secret-token");
  });

  it("builds worker routes with the ExternalQuestion query", async () => {
    const { calls, impl } = stubFetch(200, { kind: "task" });
    const client = new GatewayClient("http://api.test", null, impl);
    await client.taskPage("covid", {
      assignmentId: "MKA-1",
      hitId: "HIT-1",
      workerId: "w1",
      turkSubmitTo: "https://mturk.invalid/submit",
    });
    const url = new URL(calls[0].url);
    expect(url.pathname).toBe("/w/task/covid");
    expect(url.searchParams.get("assignmentId")).toBe("MKA-1");
    expect(url.searchParams.get("turkSubmitTo")).toBe("https://mturk.invalid/submit");
  });

  it("raises ApiError with the body on 4xx", async () => {
    const { impl } = stubFetch(403, { error: "not-qualified" });
    const client = new GatewayClient("http://api.test", null, impl);
    await expect(client.taskPage("covid", {
      assignmentId: "a", hitId: "h", workerId: "w", turkSubmitTo: "t",
    })).rejects.toThrowError(ApiError);
  });

  it("posts submissions as JSON", async () => {
    const { calls, impl } = stubFetch(200, { accepted: true });
    const client = new GatewayClient("http://api.test", null, impl);
    await client.submit("tok", { values: {}, group_counts: {} });
    expect(calls[0].method).toBe("POST");
    expect(JSON.parse(calls[0].body!)).toEqual({ values: {}, group_counts: {} });
  });
});

describe("marketplace POST-back", () => {
  it("renders a self-submitting form carrying assignmentId", () => {
    const html = submitFormHtml({
      action: "https://workersandbox.mturk.invalid/submit",
      method: "POST",
      fields: { assignmentId: "MKA-42" },
    });
    expect(html).toContain('action="https://workersandbox.mturk.invalid/submit"');
    expect(html).toContain('name="assignmentId" value="MKA-42"');
    expect(html).toContain("submit()");
  });

  it("escapes attribute values", () => {
    const html = submitFormHtml({
      action: 'https://x.test/"><script>alert(1)</script>',
      method: "POST",
      fields: { assignmentId: "a&b" },
    });
    expect(html).not.toContain("<script>alert");
    expect(html).toContain("a&amp;b");
  });
});
