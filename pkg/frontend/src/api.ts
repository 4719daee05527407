/**
 * Gateway client. Worker routes follow the ExternalQuestion iframe
 * contract; when a submit is accepted the caller receives the
 * self-submitting form target (turkSubmitTo + assignmentId) to POST back
 * to the marketplace. No frame-busting anywhere.
 */

export type FetchLike = (
  url: string,
  init?: {
    method?: string;
    headers?: Record<string, string>;
    body?: string;
  },
) => Promise<{ status: number; json(): Promise<unknown>; text(): Promise<string> }>;

export interface ExternalQuestionParams {
  assignmentId: string;
  hitId: string;
  workerId: string;
  turkSubmitTo: string;
}

export const PREVIEW_SENTINEL = "ASSIGNMENT_ID_NOT_AVAILABLE";

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: unknown,
  ) {
    super(`gateway error ${status}`);
  }
}

export class GatewayClient {
  constructor(
    private baseUrl: string,
    private token: string | null = null,
    private fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private headers(json = true): Record<string, string> {
    const h: Record<string, string> = { Accept: "application/json" };
    if (json) h["Content-Type"] = "application/json";
    if (this.token) h["Authorization"] = `Bearer ${this.token}`;
    return h;
  }

  private async request(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<unknown> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: this.headers(body !== undefined),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await resp.json().catch(() => null);
    if (resp.status >= 400) throw new ApiError(resp.status, payload);
    return payload;
  }

  getPipeline(name: string): Promise<unknown> {
    return this.request("GET", `/api/v1/pipelines/${name}`);
  }

  putPipeline(name: string, document: unknown): Promise<unknown> {
    return this.request("PUT", `/api/v1/pipelines/${name}`, document);
  }

  launch(
    name: string,
    body: { kind: "exam" | "taskset"; reward: number; count: number; gate?: string[] },
  ): Promise<unknown> {
    return this.request("POST", `/api/v1/pipelines/${name}/launch`, body);
  }

  report(name: string): Promise<unknown> {
    return this.request("GET", `/api/v1/pipelines/${name}/report`);
  }

  annotators(name: string): Promise<unknown> {
    return this.request("GET", `/api/v1/pipelines/${name}/annotators`);
  }

  private workerQuery(params: ExternalQuestionParams): string {
    const q = new URLSearchParams({
      assignmentId: params.assignmentId,
      hitId: params.hitId,
      workerId: params.workerId,
      turkSubmitTo: params.turkSubmitTo,
    });
    return q.toString();
  }

  tutorialPage(name: string): Promise<unknown> {
    return this.request("GET", `/w/tutorial/${name}`);
  }

  examPage(name: string, params: ExternalQuestionParams): Promise<unknown> {
    return this.request("GET", `/w/exam/${name}?${this.workerQuery(params)}`);
  }

  taskPage(name: string, params: ExternalQuestionParams): Promise<unknown> {
    return this.request("GET", `/w/task/${name}?${this.workerQuery(params)}`);
  }

  submit(token: string, payload: unknown): Promise<unknown> {
    return this.request("POST", `/w/submit/${token}`, payload);
  }
}

/**
 * The marketplace handshake: an accepted submit answers with
 * {submit_form: {action, method, fields}}; rendering it as an
 * auto-submitted form completes the ExternalQuestion round trip.
 */
export function submitFormHtml(form: {
  action: string;
  method: string;
  fields: Record<string, string>;
}): string {
  const inputs = Object.entries(form.fields)
    .map(
      ([name, value]) =>
        `<input type="hidden" name="${escapeAttr(name)}" value="${escapeAttr(value)}"/>`,
    )
    .join("");
  return (
    `<form id="mturk-submit" action="${escapeAttr(form.action)}" ` +
    `method="${escapeAttr(form.method)}">${inputs}</form>` +
    `<script>document.getElementById("mturk-submit").submit();</script>`
  );
}

function escapeAttr(value: string): string {
  return value
    .replaceAll("&", "&amp;")
    .replaceAll('"', "&quot;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;");
}
