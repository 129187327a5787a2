/** Thin typed client over the JSON API. All state lives on the server;
 * the client holds only the bearer token for the session. */

import type {
  AssignmentSummary,
  AssignmentView,
  IaaReport,
  LoginResponse,
  OwnStats,
  PairInfo,
  TaskInfo,
  TimingStats,
  UserInfo,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  token: string | null = null;

  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init)
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    raw?: { content?: string; accept?: string }
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    let payload: string | undefined;
    if (raw?.content !== undefined) {
      headers["Content-Type"] = "application/xml";
      payload = raw.content;
    } else if (body !== undefined) {
      headers["Content-Type"] = "application/json";
      payload = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers,
      body: payload,
    });
    if (!response.ok) {
      let detail = `${response.status}`;
      try {
        const parsed = await response.json();
        if (parsed && typeof parsed.detail === "string") detail = parsed.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, detail);
    }
    if (raw?.accept === "text") {
      return (await response.text()) as unknown as T;
    }
    return (await response.json()) as T;
  }

  async login(username: string, password: string): Promise<LoginResponse> {
    const result = await this.request<LoginResponse>("POST", "/auth/login", {
      username,
      password,
    });
    this.token = result.token;
    return result;
  }

  async logout(): Promise<void> {
    await this.request("POST", "/auth/logout");
    this.token = null;
  }

  me(): Promise<UserInfo> {
    return this.request("GET", "/me");
  }

  myStats(): Promise<OwnStats> {
    return this.request("GET", "/me/stats");
  }

  listAssignments(): Promise<AssignmentSummary[]> {
    return this.request("GET", "/assignments");
  }

  getAssignment(assignmentId: string): Promise<AssignmentView> {
    return this.request("GET", `/assignments/${assignmentId}`);
  }

  startAssignment(assignmentId: string): Promise<AssignmentSummary> {
    return this.request("POST", `/assignments/${assignmentId}/start`);
  }

  saveDraft(
    assignmentId: string,
    unitId: string,
    tags: Record<number, string>
  ): Promise<{ draft_version: number }> {
    return this.request("PUT", `/assignments/${assignmentId}/units/${unitId}/draft`, {
      tags,
    });
  }

  submitUnit(
    assignmentId: string,
    unitId: string,
    tags: Record<number, string>,
    version: number
  ): Promise<{ committed: number; unit_version: number }> {
    return this.request("POST", `/assignments/${assignmentId}/units/${unitId}/submit`, {
      tags,
      version,
    });
  }

  submitAssignment(assignmentId: string): Promise<AssignmentSummary> {
    return this.request("POST", `/assignments/${assignmentId}/submit`);
  }

  reopenAssignment(assignmentId: string): Promise<AssignmentSummary> {
    return this.request("POST", `/assignments/${assignmentId}/reopen`);
  }

  reviewAssignment(
    assignmentId: string,
    grade: "pass" | "no_pass",
    feedback?: string
  ): Promise<AssignmentSummary> {
    return this.request("POST", `/assignments/${assignmentId}/review`, {
      grade,
      feedback: feedback ?? null,
    });
  }

  listTasks(): Promise<TaskInfo[]> {
    return this.request("GET", "/tasks");
  }

  createTask(body: {
    pair_id: string;
    genre: string;
    unit_ids: string[];
    overlap_percent: number;
  }): Promise<TaskInfo> {
    return this.request("POST", "/tasks", body);
  }

  assignTask(taskId: string, annotatorIds: string[]): Promise<AssignmentSummary[]> {
    return this.request("POST", `/tasks/${taskId}/assign`, {
      annotator_ids: annotatorIds,
    });
  }

  submissions(taskId: string): Promise<AssignmentSummary[]> {
    return this.request("GET", `/tasks/${taskId}/submissions`);
  }

  iaa(taskId: string): Promise<IaaReport> {
    return this.request("GET", `/tasks/${taskId}/iaa`);
  }

  tagDistribution(taskId: string): Promise<Record<string, number>> {
    return this.request("GET", `/tasks/${taskId}/tag-distribution`);
  }

  timing(taskId: string): Promise<TimingStats> {
    return this.request("GET", `/tasks/${taskId}/timing`);
  }

  listPairs(): Promise<PairInfo[]> {
    return this.request("GET", "/pairs");
  }

  createPair(body: {
    pair_id: string;
    lang_primary: string;
    lang_secondary: string;
  }): Promise<{ pair_id: string }> {
    return this.request("POST", "/pairs", body);
  }

  listUsers(): Promise<UserInfo[]> {
    return this.request("GET", "/users");
  }

  createUser(body: {
    username: string;
    password: string;
    role: string;
    language_pairs: string[];
  }): Promise<UserInfo> {
    return this.request("POST", "/users", body);
  }

  deactivateUser(userId: string): Promise<UserInfo> {
    return this.request("DELETE", `/users/${userId}`);
  }

  ingest(body: {
    pair_id: string;
    genre: string;
    records?: Array<Record<string, string>>;
    thread?: unknown;
    lines?: string[];
    pretag?: boolean;
  }): Promise<{ ingested: number; skipped: number; unit_ids: string[] }> {
    return this.request("POST", "/ingest", body);
  }

  exportXml(scope: string, fields?: string): Promise<string> {
    const query = fields
      ? `?scope=${encodeURIComponent(scope)}&fields=${encodeURIComponent(fields)}`
      : `?scope=${encodeURIComponent(scope)}`;
    return this.request("GET", `/export${query}`, undefined, { accept: "text" });
  }

  importXml(document: string): Promise<{ tasks: number; units: number; records: number }> {
    return this.request("POST", "/import", undefined, { content: document });
  }

  health(): Promise<{ version: string; storage: string }> {
    return this.request("GET", "/health");
  }
}
