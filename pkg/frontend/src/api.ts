import type { ApprovalDto, Decision, RunStateDto } from "./types.js";

/** Thin typed client for the control API's JSON endpoints. */
export class ControlApi {
  constructor(
    private baseUrl: string,
    private token?: string,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers.Authorization = `Bearer ${this.token}`;
    return headers;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      const detail = await response.text();
      throw new Error(`${method} ${path}: HTTP ${response.status} ${detail}`);
    }
    return (await response.json()) as T;
  }

  listRuns(): Promise<RunStateDto[]> {
    return this.request("GET", "/runs");
  }

  createRun(agent: string, task: string, opts?: { runId?: string; maxInteractions?: number }): Promise<RunStateDto> {
    return this.request("POST", "/runs", {
      agent,
      task,
      run_id: opts?.runId ?? null,
      max_interactions: opts?.maxInteractions ?? 10,
    });
  }

  runState(runId: string): Promise<RunStateDto> {
    return this.request("GET", `/runs/${runId}/state`);
  }

  pendingApproval(runId: string): Promise<ApprovalDto | null> {
    return this.request("GET", `/runs/${runId}/approvals/pending`);
  }

  resolveApproval(runId: string, requestId: string, decision: Decision): Promise<ApprovalDto> {
    return this.request("POST", `/runs/${runId}/approvals/${requestId}`, { decision });
  }

  injectMessage(runId: string, text: string): Promise<{ queued: boolean }> {
    return this.request("POST", `/runs/${runId}/messages`, { text });
  }

  switchAgent(runId: string, name: string): Promise<{ queued: boolean }> {
    return this.request("POST", `/runs/${runId}/agent`, { name });
  }

  interrupt(runId: string): Promise<{ interrupted: boolean }> {
    return this.request("POST", `/runs/${runId}/interrupt`, {});
  }

  agents(): Promise<string[]> {
    return this.request("GET", "/agents");
  }

  /** Normalized JSONL trace export; byte-stable for identical runs. */
  async trace(runId: string, normalize = true): Promise<string> {
    const flag = normalize ? 1 : 0;
    const response = await this.fetchImpl(
      `${this.baseUrl}/runs/${runId}/trace?normalize=${flag}`,
      { headers: this.headers() },
    );
    if (!response.ok) throw new Error(`trace ${runId}: HTTP ${response.status}`);
    return response.text();
  }

  /** Poll until the run leaves "running" or the timeout lapses. */
  async waitForCompletion(runId: string, timeoutMs = 10_000): Promise<RunStateDto> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const state = await this.runState(runId);
      if (state.status !== "running") return state;
      if (Date.now() > deadline) throw new Error(`run ${runId} still running`);
      await new Promise((resolve) => setTimeout(resolve, 50));
    }
  }

  /** Poll until an approval request is pending for the run. */
  async waitForApproval(runId: string, timeoutMs = 10_000): Promise<ApprovalDto> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const pending = await this.pendingApproval(runId);
      if (pending) return pending;
      if (Date.now() > deadline) throw new Error(`no approval pending on ${runId}`);
      await new Promise((resolve) => setTimeout(resolve, 50));
    }
  }
}
