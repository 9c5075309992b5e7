import { describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("api client", () => {
  it("lists demos", async () => {
    const fetchFn = vi.fn().mockResolvedValue(jsonResponse([{ id: "a" }]));
    const api = new ApiClient("http://svc", fetchFn);
    const demos = await api.listDemos();
    expect(fetchFn).toHaveBeenCalledWith("http://svc/demos", undefined);
    expect(demos).toEqual([{ id: "a" }]);
  });

  it("puts clicks as a bare JSON array", async () => {
    const fetchFn = vi.fn().mockResolvedValue(jsonResponse({ ok: true, version: 2 }));
    const api = new ApiClient("", fetchFn);
    const res = await api.putClicks("demo_a", [true, false]);
    expect(res.version).toBe(2);
    const [url, init] = fetchFn.mock.calls[0];
    expect(url).toBe("/demos/demo_a/clicks");
    expect(init.method).toBe("PUT");
    expect(JSON.parse(init.body)).toEqual([true, false]);
  });

  it("posts preview clicks inside a body object", async () => {
    const fetchFn = vi.fn().mockImplementation(() =>
      Promise.resolve(
        jsonResponse({ modes: [], waypoint_indices: [], segments: [] }),
      ),
    );
    const api = new ApiClient("", fetchFn);
    await api.preview("demo_a", [true]);
    const [, init] = fetchFn.mock.calls[0];
    expect(JSON.parse(init.body)).toEqual({ clicks: [true] });
    await api.preview("demo_a");
    expect(JSON.parse(fetchFn.mock.calls[1][1].body)).toEqual({});
  });

  it("surfaces server validation messages", async () => {
    const fetchFn = vi.fn().mockImplementation(() =>
      Promise.resolve(jsonResponse({ detail: "expected 12 clicks, got 3" }, 400)),
    );
    const api = new ApiClient("", fetchFn);
    await expect(api.putClicks("demo_a", [true])).rejects.toThrowError(
      /expected 12 clicks/,
    );
    await expect(api.putClicks("demo_a", [true])).rejects.toBeInstanceOf(
      ApiError,
    );
  });
});
