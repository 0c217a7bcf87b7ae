import { describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import type { EvaluateRequest } from "../src/types.js";

const REQUEST: EvaluateRequest = {
  interest: ["blood"],
  markers: { HBB: { detected: 1, total: 4 } },
};

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("ApiClient", () => {
  it("maps 4xx bodies to field-level errors", async () => {
    const fetchFn = vi.fn(async () =>
      jsonResponse(400, { error: { code: "invalid_request", message: "bad marker" } }));
    const client = new ApiClient("", fetchFn as unknown as typeof fetch);
    const err = await client.evaluate(REQUEST).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.kind).toBe("field");
    expect(err.code).toBe("invalid_request");
    expect(err.message).toBe("bad marker");
  });

  it("maps 5xx bodies to banner errors", async () => {
    const fetchFn = vi.fn(async () =>
      jsonResponse(500, { error: { code: "numeric_failure", message: "boom" } }));
    const client = new ApiClient("", fetchFn as unknown as typeof fetch);
    const err = await client.evaluate(REQUEST).catch((e) => e);
    expect(err.kind).toBe("banner");
  });

  it("cancels the in-flight evaluation when a new one starts", async () => {
    const seenSignals: AbortSignal[] = [];
    const fetchFn = vi.fn((url: string, init?: RequestInit) => {
      seenSignals.push(init!.signal as AbortSignal);
      return new Promise<Response>((resolve, reject) => {
        init!.signal!.addEventListener("abort", () =>
          reject(new DOMException("aborted", "AbortError")));
        setTimeout(() => resolve(jsonResponse(200, { ok: true })), 50);
      });
    });
    const client = new ApiClient("", fetchFn as unknown as typeof fetch);
    const first = client.evaluate(REQUEST).catch((e) => e);
    const second = client.evaluate(REQUEST);
    const firstResult = await first;
    expect(firstResult).toBeInstanceOf(DOMException);
    expect((firstResult as DOMException).name).toBe("AbortError");
    await expect(second).resolves.toEqual({ ok: true });
    expect(seenSignals[0]!.aborted).toBe(true);
    expect(seenSignals[1]!.aborted).toBe(false);
  });

  it("fetches the panel from the versioned path", async () => {
    const fetchFn = vi.fn(async () => jsonResponse(200, { markers: [] }));
    const client = new ApiClient("http://svc:1234/", fetchFn as unknown as typeof fetch);
    await client.panel();
    expect(fetchFn).toHaveBeenCalledWith("http://svc:1234/api/v1/panel");
  });
});
