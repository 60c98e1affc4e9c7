/** Pure session state machine.
 *
 * The UI state is a function of server responses: every event here is
 * either a server payload or a user intent, and the reducer never talks
 * to the network itself. That keeps labeling refresh-safe and testable,
 * and guarantees one API call per user action (main.ts performs the call
 * recorded in `pendingSubmission`, retrying the same one after network
 * failures so submission stays idempotent per task).
 */

import type { SessionInfo, StatusPayload, SubmitResult, TaskPayload } from "./api.js";

export type Phase = "setup" | "labeling" | "retraining" | "done" | "error";

export interface PendingSubmission {
  taskId: string;
  /** Class index, or null for a skip. */
  classIndex: number | null;
}

export interface AppState {
  phase: Phase;
  sessionId: string | null;
  classes: string[];
  k: number;
  labeled: number;
  skipped: number;
  task: TaskPayload | null;
  pendingSubmission: PendingSubmission | null;
  banner: string | null;
  status: StatusPayload | null;
}

export const initialState: AppState = {
  phase: "setup",
  sessionId: null,
  classes: [],
  k: 0,
  labeled: 0,
  skipped: 0,
  task: null,
  pendingSubmission: null,
  banner: null,
  status: null,
};

export type AppEvent =
  | { type: "session-created"; info: SessionInfo }
  | { type: "task-received"; task: TaskPayload }
  | { type: "queue-empty" }
  | { type: "submit"; classIndex: number | null }
  | { type: "submit-accepted"; result: SubmitResult }
  | { type: "submit-conflict" }
  | { type: "network-error"; message: string }
  | { type: "retry" }
  | { type: "status-updated"; status: StatusPayload }
  | { type: "fatal"; message: string };

export function reduce(state: AppState, event: AppEvent): AppState {
  switch (event.type) {
    case "session-created":
      return {
        ...initialState,
        phase: "labeling",
        sessionId: event.info.session_id,
        classes: event.info.classes,
        k: event.info.k,
      };

    case "task-received":
      // A stale fetch must not clobber an in-flight submission's task.
      if (state.pendingSubmission !== null) return state;
      return { ...state, phase: "labeling", task: event.task, banner: null };

    case "queue-empty":
      return { ...state, task: null, phase: "retraining" };

    case "submit": {
      // One API call per action: ignore while another is in flight.
      if (state.task === null || state.pendingSubmission !== null) return state;
      if (
        event.classIndex !== null &&
        (event.classIndex < 0 || event.classIndex >= state.classes.length)
      ) {
        return state; // digit key outside the class list
      }
      return {
        ...state,
        pendingSubmission: { taskId: state.task.task_id, classIndex: event.classIndex },
      };
    }

    case "submit-accepted": {
      const wasLabel = state.pendingSubmission?.classIndex !== null;
      return {
        ...state,
        task: null,
        pendingSubmission: null,
        banner: null,
        labeled: state.labeled + (wasLabel ? 1 : 0),
        skipped: state.skipped + (wasLabel ? 0 : 1),
        phase: event.result.remaining === 0 ? "retraining" : "labeling",
      };
    }

    case "submit-conflict":
      // Someone else resolved the task; drop it and refresh the queue.
      return { ...state, task: null, pendingSubmission: null, banner: null };

    case "network-error":
      // Keep pendingSubmission: the retry re-sends the identical call.
      return { ...state, banner: event.message };

    case "retry":
      return { ...state, banner: null };

    case "status-updated": {
      const done = event.status.model_version > 0;
      return {
        ...state,
        status: event.status,
        phase: done ? "done" : state.phase,
      };
    }

    case "fatal":
      return { ...state, phase: "error", banner: event.message };
  }
}

/** Remaining count shown in the progress bar. */
export function remaining(state: AppState): number {
  return Math.max(0, state.k - state.labeled - state.skipped);
}
