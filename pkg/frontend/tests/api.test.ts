import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function mockFetch(resp: Response | Error) {
  const fn = vi.fn(() => (resp instanceof Error ? Promise.reject(resp) : Promise.resolve(resp)));
  vi.stubGlobal("fetch", fn);
  return fn;
}

afterEach(() => vi.unstubAllGlobals());

describe("request shapes", () => {
  it("createSession posts the documented body", async () => {
    const fn = mockFetch(jsonResponse({ session_id: "s1", k: 4, classes: [] }));
    const out = await new ApiClient("http://h").createSession("user_0", 0.5, "varratio");
    expect(out.session_id).toBe("s1");
    const [url, init] = fn.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("http://h/session");
    expect(init.method).toBe("POST");
    expect(JSON.parse(init.body as string)).toEqual({
      user: "user_0",
      eta: 0.5,
      function: "varratio",
    });
  });

  it("label posts task id and class index", async () => {
    const fn = mockFetch(jsonResponse({ accepted: true, remaining: 1, model_version: 0 }));
    await new ApiClient().label("s1", "s1-t0", 3);
    const [url, init] = fn.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("/session/s1/label");
    expect(JSON.parse(init.body as string)).toEqual({ task_id: "s1-t0", class_index: 3 });
  });

  it("skip posts only the task id", async () => {
    const fn = mockFetch(jsonResponse({ accepted: true, remaining: 0, model_version: 1 }));
    await new ApiClient().skip("s1", "s1-t0");
    const [url, init] = fn.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("/session/s1/skip");
    expect(JSON.parse(init.body as string)).toEqual({ task_id: "s1-t0" });
  });

  it("status and config are plain GETs", async () => {
    const fn = mockFetch(jsonResponse({ model_version: 0 }));
    await new ApiClient().status("s9");
    const [url, init] = fn.mock.calls[0] as unknown as [string, RequestInit | undefined];
    expect(url).toBe("/session/s9/status");
    expect(init?.method).toBeUndefined();
  });
});

describe("response handling", () => {
  it("204 from next means queue exhausted -> null", async () => {
    mockFetch(new Response(null, { status: 204 }));
    expect(await new ApiClient().nextTask("s1")).toBeNull();
  });

  it("server errors carry status and detail", async () => {
    mockFetch(jsonResponse({ detail: "task s1-t0 already labeled" }, 409));
    const err = await new ApiClient().label("s1", "s1-t0", 0).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(409);
    expect(err.isConflict).toBe(true);
    expect(err.message).toContain("already labeled");
  });

  it("400 is not a conflict", async () => {
    mockFetch(jsonResponse({ detail: "class index 9 out of range" }, 400));
    const err = await new ApiClient().label("s1", "s1-t0", 9).catch((e) => e);
    expect(err.status).toBe(400);
    expect(err.isConflict).toBe(false);
  });

  it("transport failure maps to status 0", async () => {
    mockFetch(new TypeError("fetch failed"));
    const err = await new ApiClient().nextTask("s1").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(0);
    expect(err.isNetwork).toBe(true);
  });

  it("non-JSON error bodies fall back to the status text", async () => {
    mockFetch(new Response("<html>oops</html>", { status: 500, statusText: "Server Error" }));
    const err = await new ApiClient().status("s1").catch((e) => e);
    expect(err.status).toBe(500);
    expect(err.message).toBe("Server Error");
  });
});
