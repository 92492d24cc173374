/** Thin typed wrapper over the v1 session HTTP API. */
import { streamEvents, StreamOptions } from "./sse.js";
import type {
  InterventionAck,
  InterventionPayload,
  SessionHandle,
  StreamMessage,
  TraceEvent,
} from "./types.js";

export class ServiceError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ServiceClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : {},
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const text = await response.text();
    if (!response.ok) {
      let detail = text;
      try {
        detail = (JSON.parse(text) as { error?: string }).error ?? text;
      } catch {
        /* plain-text error body */
      }
      throw new ServiceError(response.status, detail);
    }
    return JSON.parse(text) as T;
  }

  createSession(
    scenario: unknown,
    config?: Record<string, unknown>,
    script?: unknown[],
  ): Promise<SessionHandle> {
    return this.request("POST", "/v1/sessions", {
      schema: "v1",
      scenario,
      ...(config ? { config } : {}),
      ...(script ? { script } : {}),
    });
  }

  getSession(id: string): Promise<SessionHandle & { metrics: unknown; clock: number }> {
    return this.request("GET", `/v1/sessions/${id}`);
  }

  start(id: string): Promise<SessionHandle> {
    return this.request("POST", `/v1/sessions/${id}/start`);
  }

  pause(id: string): Promise<SessionHandle> {
    return this.request("POST", `/v1/sessions/${id}/pause`);
  }

  resume(id: string): Promise<SessionHandle> {
    return this.request("POST", `/v1/sessions/${id}/resume`);
  }

  setSpeed(id: string, multiplier: number): Promise<SessionHandle> {
    return this.request("POST", `/v1/sessions/${id}/speed`, { multiplier });
  }

  intervene(id: string, payload: InterventionPayload): Promise<InterventionAck> {
    return this.request("POST", `/v1/sessions/${id}/interventions`, payload);
  }

  async trace(id: string): Promise<TraceEvent[]> {
    const response = await this.fetchImpl(`${this.baseUrl}/v1/sessions/${id}/trace`);
    if (!response.ok) throw new ServiceError(response.status, "trace export failed");
    const text = await response.text();
    return text
      .split("\n")
      .filter((line) => line.length > 0)
      .map((line) => JSON.parse(line) as TraceEvent);
  }

  stream(id: string, options: StreamOptions = {}): AsyncGenerator<StreamMessage> {
    return streamEvents(`${this.baseUrl}/v1/sessions/${id}/stream`, {
      fetchImpl: this.fetchImpl,
      ...options,
    });
  }
}
