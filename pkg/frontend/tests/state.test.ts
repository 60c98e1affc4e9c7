import { describe, expect, it } from "vitest";

import type { SessionInfo, StatusPayload, SubmitResult, TaskPayload } from "../src/api.js";
import { AppState, initialState, reduce, remaining } from "../src/state.js";

const info: SessionInfo = { session_id: "s0001", k: 3, classes: ["walk", "sit"] };

function task(id = "s0001-t0000"): TaskPayload {
  return {
    task_id: id,
    axes: [[0, 1], [1, 0], [0.5, 0.5]],
    rate_hz: 32,
    classes: info.classes,
    score: 0.4,
    function: "varratio",
    remaining: 3,
  };
}

const ok: SubmitResult = { accepted: true, remaining: 2, model_version: 0 };

function labelingState(): AppState {
  let s = reduce(initialState, { type: "session-created", info });
  s = reduce(s, { type: "task-received", task: task() });
  return s;
}

describe("session lifecycle", () => {
  it("starts labeling when the session is created", () => {
    const s = reduce(initialState, { type: "session-created", info });
    expect(s.phase).toBe("labeling");
    expect(s.sessionId).toBe("s0001");
    expect(s.k).toBe(3);
    expect(s.classes).toEqual(["walk", "sit"]);
  });

  it("a new session resets all progress", () => {
    let s = labelingState();
    s = reduce(s, { type: "submit", classIndex: 0 });
    s = reduce(s, { type: "session-created", info });
    expect(s.labeled).toBe(0);
    expect(s.pendingSubmission).toBeNull();
    expect(s.task).toBeNull();
  });

  it("queue exhaustion moves to retraining", () => {
    const s = reduce(labelingState(), { type: "queue-empty" });
    expect(s.phase).toBe("retraining");
    expect(s.task).toBeNull();
  });

  it("status with a bumped model version finishes the session", () => {
    const status = { model_version: 1 } as StatusPayload;
    const s = reduce(labelingState(), { type: "status-updated", status });
    expect(s.phase).toBe("done");
    expect(s.status).toBe(status);
  });

  it("status without retrain keeps the current phase", () => {
    const status = { model_version: 0 } as StatusPayload;
    const s = reduce(labelingState(), { type: "status-updated", status });
    expect(s.phase).toBe("labeling");
  });
});

describe("submission discipline", () => {
  it("submit records exactly the on-screen task", () => {
    const s = reduce(labelingState(), { type: "submit", classIndex: 1 });
    expect(s.pendingSubmission).toEqual({ taskId: "s0001-t0000", classIndex: 1 });
  });

  it("skip is a submission with a null class", () => {
    const s = reduce(labelingState(), { type: "submit", classIndex: null });
    expect(s.pendingSubmission).toEqual({ taskId: "s0001-t0000", classIndex: null });
  });

  it("a second submit while one is in flight is ignored", () => {
    let s = reduce(labelingState(), { type: "submit", classIndex: 0 });
    const again = reduce(s, { type: "submit", classIndex: 1 });
    expect(again).toBe(s); // identical state: no second call recorded
  });

  it("digit keys outside the class list are ignored", () => {
    const s = reduce(labelingState(), { type: "submit", classIndex: 7 });
    expect(s.pendingSubmission).toBeNull();
  });

  it("submit without a task is ignored", () => {
    const s = reduce(reduce(initialState, { type: "session-created", info }), {
      type: "submit",
      classIndex: 0,
    });
    expect(s.pendingSubmission).toBeNull();
  });

  it("acceptance clears the task and counts a label", () => {
    let s = reduce(labelingState(), { type: "submit", classIndex: 0 });
    s = reduce(s, { type: "submit-accepted", result: ok });
    expect(s.task).toBeNull();
    expect(s.pendingSubmission).toBeNull();
    expect(s.labeled).toBe(1);
    expect(s.skipped).toBe(0);
    expect(remaining(s)).toBe(2);
  });

  it("acceptance of a skip counts a skip", () => {
    let s = reduce(labelingState(), { type: "submit", classIndex: null });
    s = reduce(s, { type: "submit-accepted", result: ok });
    expect(s.skipped).toBe(1);
    expect(s.labeled).toBe(0);
  });

  it("accepting the final task moves to retraining", () => {
    let s = reduce(labelingState(), { type: "submit", classIndex: 0 });
    s = reduce(s, {
      type: "submit-accepted",
      result: { accepted: true, remaining: 0, model_version: 0 },
    });
    expect(s.phase).toBe("retraining");
  });

  it("conflict drops the task so the queue can refresh", () => {
    let s = reduce(labelingState(), { type: "submit", classIndex: 0 });
    s = reduce(s, { type: "submit-conflict" });
    expect(s.task).toBeNull();
    expect(s.pendingSubmission).toBeNull();
    expect(s.labeled).toBe(0); // never counted: the server refused it
  });
});

describe("network failures", () => {
  it("keeps the pending submission for an idempotent retry", () => {
    let s = reduce(labelingState(), { type: "submit", classIndex: 1 });
    const failed = reduce(s, { type: "network-error", message: "offline" });
    expect(failed.banner).toBe("offline");
    expect(failed.pendingSubmission).toEqual(s.pendingSubmission);
    expect(failed.task).toEqual(s.task);
  });

  it("retry clears the banner but not the submission", () => {
    let s = reduce(labelingState(), { type: "submit", classIndex: 1 });
    s = reduce(s, { type: "network-error", message: "offline" });
    s = reduce(s, { type: "retry" });
    expect(s.banner).toBeNull();
    expect(s.pendingSubmission).not.toBeNull();
  });

  it("a stale task fetch cannot clobber an in-flight submission", () => {
    let s = reduce(labelingState(), { type: "submit", classIndex: 0 });
    const after = reduce(s, { type: "task-received", task: task("s0001-t0001") });
    expect(after).toBe(s);
  });

  it("fatal errors land in the error phase", () => {
    const s = reduce(initialState, { type: "fatal", message: "boom" });
    expect(s.phase).toBe("error");
    expect(s.banner).toBe("boom");
  });
});

describe("state purity", () => {
  it("reduce never mutates its input", () => {
    const before = labelingState();
    const snapshot = JSON.stringify(before);
    reduce(before, { type: "submit", classIndex: 0 });
    reduce(before, { type: "queue-empty" });
    expect(JSON.stringify(before)).toBe(snapshot);
  });
});
