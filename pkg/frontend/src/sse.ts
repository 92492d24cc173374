/** Server-sent-events parsing and a resumable stream reader. The parser
 * is incremental so chunk boundaries may fall anywhere. */
import type { StreamMessage, TraceEvent } from "./types.js";

export class SSEParser {
  private buffer = "";
  private id: number | null = null;
  private event = "";
  private data = "";

  /** Feed a chunk; returns the messages completed by it. */
  feed(chunk: string): StreamMessage[] {
    this.buffer += chunk;
    const out: StreamMessage[] = [];
    let nl: number;
    while ((nl = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, nl).replace(/\r$/, "");
      this.buffer = this.buffer.slice(nl + 1);
      if (line === "") {
        if (this.data !== "") {
          out.push({
            id: this.id ?? -1,
            event: this.event || "message",
            data: JSON.parse(this.data) as TraceEvent,
          });
        }
        this.id = null;
        this.event = "";
        this.data = "";
        continue;
      }
      if (line.startsWith(":")) continue; // comment / keep-alive
      const colon = line.indexOf(":");
      const field = colon < 0 ? line : line.slice(0, colon);
      let value = colon < 0 ? "" : line.slice(colon + 1);
      if (value.startsWith(" ")) value = value.slice(1);
      if (field === "id") this.id = Number(value);
      else if (field === "event") this.event = value;
      else if (field === "data") this.data += (this.data ? "\n" : "") + value;
    }
    return out;
  }
}

export interface StreamOptions {
  lastEventId?: number;
  fetchImpl?: typeof fetch;
  signal?: AbortSignal;
  /** Called when the connection drops and a resume is attempted. */
  onReconnect?: (lastEventId: number) => void;
  maxReconnects?: number;
}

/** Async iterator over a session's event stream; reconnects with
 * Last-Event-ID so the consumer sees no gaps and no duplicates. */
export async function* streamEvents(
  url: string,
  options: StreamOptions = {},
): AsyncGenerator<StreamMessage> {
  const fetchImpl = options.fetchImpl ?? fetch;
  let lastEventId = options.lastEventId ?? -1;
  let reconnects = 0;
  const maxReconnects = options.maxReconnects ?? 5;

  for (;;) {
    const headers: Record<string, string> = { Accept: "text/event-stream" };
    if (lastEventId >= 0) headers["Last-Event-ID"] = String(lastEventId);
    let response: Response;
    try {
      response = await fetchImpl(url, { headers, signal: options.signal });
    } catch (err) {
      if (options.signal?.aborted || reconnects >= maxReconnects) throw err;
      reconnects += 1;
      options.onReconnect?.(lastEventId);
      continue;
    }
    if (response.status === 410) return; // session evicted
    if (!response.ok || response.body === null) {
      throw new Error(`stream failed: HTTP ${response.status}`);
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    const parser = new SSEParser();
    let sawTerminal = false;
    try {
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        for (const msg of parser.feed(decoder.decode(value, { stream: true }))) {
          if (msg.id <= lastEventId) continue; // duplicate after resume
          lastEventId = msg.id;
          if (msg.event === "metrics") sawTerminal = true;
          yield msg;
        }
      }
    } catch (err) {
      if (options.signal?.aborted) return;
      if (reconnects >= maxReconnects) throw err;
      reconnects += 1;
      options.onReconnect?.(lastEventId);
      continue;
    }
    if (sawTerminal) return; // orderly close after the terminal event
    if (reconnects >= maxReconnects) return;
    reconnects += 1;
    options.onReconnect?.(lastEventId);
  }
}
