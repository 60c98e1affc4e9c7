/** DOM wiring: one API call per user action, state held by the reducer. */

import { ApiClient, ApiError } from "./api.js";
import type { TaskPayload } from "./api.js";
import { draw } from "./plot.js";
import { AppState, AppEvent, initialState, reduce, remaining } from "./state.js";

const api = new ApiClient("");

let state: AppState = initialState;

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function dispatch(event: AppEvent): void {
  state = reduce(state, event);
  render();
}

// ---------------------------------------------------------------------------
// Effects: each reducer-approved intent triggers exactly one API call.

async function startSession(): Promise<void> {
  const user = ($("user") as HTMLSelectElement).value;
  const eta = parseFloat(($("eta") as HTMLInputElement).value);
  const fn = ($("fn") as HTMLSelectElement).value;
  try {
    const info = await api.createSession(user, eta, fn);
    dispatch({ type: "session-created", info });
    await fetchNext();
  } catch (err) {
    dispatch({ type: "fatal", message: describe(err) });
  }
}

async function fetchNext(): Promise<void> {
  if (!state.sessionId) return;
  try {
    const task = await api.nextTask(state.sessionId);
    if (task === null) {
      dispatch({ type: "queue-empty" });
      await pollStatus();
    } else {
      dispatch({ type: "task-received", task });
    }
  } catch (err) {
    dispatch({ type: "network-error", message: describe(err) });
  }
}

function submit(classIndex: number | null): void {
  dispatch({ type: "submit", classIndex });
  void flushSubmission();
}

async function flushSubmission(): Promise<void> {
  const pending = state.pendingSubmission;
  if (!pending || !state.sessionId) return;
  try {
    const result =
      pending.classIndex === null
        ? await api.skip(state.sessionId, pending.taskId)
        : await api.label(state.sessionId, pending.taskId, pending.classIndex);
    dispatch({ type: "submit-accepted", result });
    await fetchNext();
  } catch (err) {
    if (err instanceof ApiError && err.isConflict) {
      dispatch({ type: "submit-conflict" });
      await fetchNext();
    } else {
      dispatch({ type: "network-error", message: describe(err) });
    }
  }
}

async function pollStatus(): Promise<void> {
  if (!state.sessionId) return;
  try {
    const status = await api.status(state.sessionId);
    dispatch({ type: "status-updated", status });
    if (status.model_version === 0) {
      setTimeout(() => void pollStatus(), 1000);
    }
  } catch (err) {
    dispatch({ type: "network-error", message: describe(err) });
    setTimeout(() => void pollStatus(), 2000);
  }
}

function retry(): void {
  dispatch({ type: "retry" });
  if (state.pendingSubmission) {
    void flushSubmission(); // identical call: idempotent per task
  } else if (state.phase === "retraining") {
    void pollStatus();
  } else {
    void fetchNext();
  }
}

function describe(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

// ---------------------------------------------------------------------------
// Rendering

function render(): void {
  $("setup").hidden = state.phase !== "setup";
  $("labeling").hidden = state.phase !== "labeling" && state.phase !== "retraining";
  $("results").hidden = state.phase !== "done";

  const banner = $("banner");
  banner.hidden = state.banner === null;
  if (state.banner !== null) $("banner-text").textContent = state.banner;

  if (state.phase === "labeling" || state.phase === "retraining") {
    $("progress").textContent =
      `${state.labeled} labeled, ${state.skipped} skipped, ${remaining(state)} remaining`;
    const waiting = $("retrain-note");
    waiting.hidden = state.phase !== "retraining";
    renderTask(state.task);
  }
  if (state.phase === "done" && state.status) {
    const pre = state.status.pre;
    const post = state.status.post;
    $("metrics").textContent =
      `accuracy ${fmt(pre?.accuracy)} → ${fmt(post?.accuracy)}   ` +
      `macro-f1 ${fmt(pre?.macro_f1)} → ${fmt(post?.macro_f1)}   ` +
      `(model v${state.status.model_version}, ${post?.n_acquired ?? 0} windows acquired)`;
  }
}

function fmt(v: number | undefined): string {
  return v === undefined || v === null ? "?" : v.toFixed(4);
}

function renderTask(task: TaskPayload | null): void {
  const pane = $("task-pane");
  pane.hidden = task === null;
  if (task === null) return;
  $("task-meta").textContent =
    `${task.function} score ${task.score.toFixed(4)} · ${task.rate_hz} Hz`;
  draw($("plot") as HTMLCanvasElement, task.axes, task.rate_hz);

  const buttons = $("class-buttons");
  buttons.textContent = "";
  task.classes.forEach((name, i) => {
    const btn = document.createElement("button");
    btn.textContent = `${i}: ${name}`;
    btn.addEventListener("click", () => submit(i));
    buttons.appendChild(btn);
  });
}

async function init(): Promise<void> {
  try {
    const cfg = await api.getConfig();
    const userSel = $("user") as HTMLSelectElement;
    cfg.users.forEach((u) => userSel.add(new Option(u, u)));
    const fnSel = $("fn") as HTMLSelectElement;
    cfg.functions.forEach((f) => fnSel.add(new Option(f, f)));
    ($("eta") as HTMLInputElement).value = String(cfg.eta_default);
  } catch (err) {
    dispatch({ type: "fatal", message: describe(err) });
    return;
  }

  $("start").addEventListener("click", () => void startSession());
  $("skip").addEventListener("click", () => submit(null));
  $("banner-retry").addEventListener("click", retry);
  document.addEventListener("keydown", (ev) => {
    // digit keys label with the matching class index
    if (state.phase === "labeling" && /^[0-9]$/.test(ev.key)) {
      submit(parseInt(ev.key, 10));
    }
  });
  render();
}

void init();
