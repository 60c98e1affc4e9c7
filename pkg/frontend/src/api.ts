/** Typed client for the sensal oracle service HTTP API.
 *
 * Every method maps to exactly one endpoint; errors surface as ApiError
 * with the HTTP status so the UI can distinguish conflicts (409) from
 * validation problems (400) and transport failures (status 0).
 */

export interface ServiceConfig {
  classes: string[];
  users: string[];
  eta_default: number;
  functions: string[];
  t_passes: number;
}

export interface SessionInfo {
  session_id: string;
  k: number;
  classes: string[];
}

export interface TaskPayload {
  task_id: string;
  axes: number[][]; // three axis traces of decimated raw samples
  rate_hz: number;
  classes: string[];
  score: number;
  function: string;
  remaining: number;
}

export interface MetricsPayload {
  accuracy: number;
  macro_f1: number;
  per_class_f1: number[];
  n_acquired: number;
}

export interface StatusPayload {
  session_id: string;
  user: string;
  eta: number;
  function: string;
  k: number;
  labeled: number;
  skipped: number;
  pending: number;
  model_version: number;
  pre: MetricsPayload | null;
  post: MetricsPayload | null;
}

export interface SubmitResult {
  accepted: boolean;
  remaining: number;
  model_version: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }

  get isConflict(): boolean {
    return this.status === 409;
  }

  get isNetwork(): boolean {
    return this.status === 0;
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T | null> {
  let resp: Response;
  try {
    resp = await fetch(url, init);
  } catch (err) {
    throw new ApiError(0, `network failure: ${String(err)}`);
  }
  if (resp.status === 204) return null;
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      /* non-JSON error body; keep statusText */
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

function post(body: unknown): RequestInit {
  return {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  };
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  async getConfig(): Promise<ServiceConfig> {
    return (await request<ServiceConfig>(`${this.baseUrl}/config`))!;
  }

  async createSession(user: string, eta: number, fn: string): Promise<SessionInfo> {
    return (await request<SessionInfo>(
      `${this.baseUrl}/session`,
      post({ user, eta, function: fn }),
    ))!;
  }

  /** Next pending task, or null when the queue is exhausted (204). */
  async nextTask(sessionId: string): Promise<TaskPayload | null> {
    return request<TaskPayload>(`${this.baseUrl}/session/${sessionId}/next`);
  }

  async label(sessionId: string, taskId: string, classIndex: number): Promise<SubmitResult> {
    return (await request<SubmitResult>(
      `${this.baseUrl}/session/${sessionId}/label`,
      post({ task_id: taskId, class_index: classIndex }),
    ))!;
  }

  async skip(sessionId: string, taskId: string): Promise<SubmitResult> {
    return (await request<SubmitResult>(
      `${this.baseUrl}/session/${sessionId}/skip`,
      post({ task_id: taskId }),
    ))!;
  }

  async status(sessionId: string): Promise<StatusPayload> {
    return (await request<StatusPayload>(`${this.baseUrl}/session/${sessionId}/status`))!;
  }
}
