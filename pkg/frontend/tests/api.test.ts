import { afterEach, describe, expect, it, vi } from "vitest";
import {
  ApiError,
  apiBase,
  formatErrorItem,
  getDefaults,
  pollUntilDone,
  postDesign,
  postReport,
} from "../src/api";
import type { JobView, ScenarioDoc } from "../src/types";

function jsonResponse(status: number, body: unknown, headers: Record<string, string> = {}): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json", ...headers },
  });
}

const DOC = { version: 1 } as unknown as ScenarioDoc;

afterEach(() => {
  vi.unstubAllGlobals();
  vi.useRealTimers();
});

describe("apiBase", () => {
  it("is same-origin unless overridden", () => {
    expect(apiBase()).toBe("");
    vi.stubGlobal("__ARMDESIGN_API__", "http://api.example:8000/");
    expect(apiBase()).toBe("http://api.example:8000");
  });
});

describe("error envelope", () => {
  it("parses {errors: [{loc, msg}]} bodies", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () =>
        jsonResponse(400, {
          errors: [
            { loc: ["body", "alpha"], msg: "must be below 1" },
            { loc: [], msg: "numbers only" },
          ],
        }),
      ),
    );
    const err = await getDefaults().then(
      () => null,
      (e: unknown) => e,
    );
    expect(err).toBeInstanceOf(ApiError);
    const apiErr = err as ApiError;
    expect(apiErr.status).toBe(400);
    expect(apiErr.errors).toHaveLength(2);
    expect(apiErr.message).toBe("alpha: must be below 1; numbers only");
  });

  it("copes with non-JSON error bodies", async () => {
    vi.stubGlobal("fetch", vi.fn(async () => new Response("boom", { status: 500 })));
    await expect(getDefaults()).rejects.toMatchObject({ status: 500, errors: [] });
  });

  it("drops the body prefix from locations", () => {
    expect(formatErrorItem({ loc: ["body", "model", "pi0"], msg: "bad" })).toBe("model.pi0: bad");
    expect(formatErrorItem({ loc: [], msg: "bad" })).toBe("bad");
  });
});

describe("postDesign", () => {
  it("posts the document and returns the job view", async () => {
    const view: JobView = { id: "abc", state: "done", created: 1, warnings: [], result: null };
    const mock = vi.fn(async (url: unknown, init?: RequestInit) => {
      expect(String(url)).toBe("/v1/designs");
      expect(init?.method).toBe("POST");
      expect(JSON.parse(String(init?.body))).toEqual({ version: 1 });
      return jsonResponse(200, view);
    });
    vi.stubGlobal("fetch", mock);
    expect(await postDesign(DOC)).toEqual(view);
  });
});

describe("pollUntilDone", () => {
  function jobSequence(states: JobView["state"][]): () => Promise<Response> {
    let call = 0;
    return async () => {
      const state = states[Math.min(call, states.length - 1)]!;
      call += 1;
      return jsonResponse(200, { id: "j1", state, created: 0, warnings: [] });
    };
  }

  it("waits with geometric backoff until the job finishes", async () => {
    vi.useFakeTimers();
    vi.stubGlobal("fetch", vi.fn(jobSequence(["queued", "running", "done"])));
    const ticks: string[] = [];
    const done = pollUntilDone("j1", { onTick: (v) => ticks.push(v.state) });
    await vi.advanceTimersByTimeAsync(999);
    expect(ticks).toEqual([]);
    await vi.advanceTimersByTimeAsync(1);
    expect(ticks).toEqual(["queued"]);
    // second wait is 1.5s
    await vi.advanceTimersByTimeAsync(1499);
    expect(ticks).toEqual(["queued"]);
    await vi.advanceTimersByTimeAsync(1);
    expect(ticks).toEqual(["queued", "running"]);
    await vi.advanceTimersByTimeAsync(2250);
    const view = await done;
    expect(view.state).toBe("done");
    expect(ticks).toEqual(["queued", "running", "done"]);
  });

  it("returns failed jobs instead of looping", async () => {
    vi.useFakeTimers();
    vi.stubGlobal("fetch", vi.fn(jobSequence(["failed"])));
    const done = pollUntilDone("j1");
    await vi.advanceTimersByTimeAsync(1000);
    expect((await done).state).toBe("failed");
  });

  it("supports cancellation between requests", async () => {
    vi.useFakeTimers();
    vi.stubGlobal("fetch", vi.fn(jobSequence(["queued"])));
    const controller = new AbortController();
    const done = pollUntilDone("j1", { signal: controller.signal });
    const outcome = done.then(
      () => "resolved",
      (e: Error) => e.name,
    );
    await vi.advanceTimersByTimeAsync(500);
    controller.abort();
    await vi.advanceTimersByTimeAsync(0);
    expect(await outcome).toBe("AbortError");
  });
});

describe("postReport", () => {
  it("returns the body and the attachment filename", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(
        async () =>
          new Response("# Report", {
            status: 200,
            headers: {
              "content-type": "text/markdown; charset=utf-8",
              "content-disposition": 'attachment; filename="trial.md"',
            },
          }),
      ),
    );
    const report = await postReport({
      result: {} as never,
      format: "md",
      filename: "trial",
    });
    expect(report.text).toBe("# Report");
    expect(report.filename).toBe("trial.md");
  });
});
