import type { TraceEvent } from "./types.js";
import { EventLog } from "./store.js";

/** One parsed server-sent-events frame. */
export interface SseFrame {
  id: string | null;
  event: string | null;
  data: string;
}

/**
 * Incremental SSE parser: feed it arbitrary byte-chunk boundaries, get
 * whole frames out. Frames are separated by a blank line.
 */
export class SseParser {
  private buffer = "";

  push(chunk: string): SseFrame[] {
    this.buffer += chunk;
    const frames: SseFrame[] = [];
    let boundary: number;
    while ((boundary = this.buffer.indexOf("\n\n")) >= 0) {
      const block = this.buffer.slice(0, boundary);
      this.buffer = this.buffer.slice(boundary + 2);
      if (block.trim()) frames.push(parseBlock(block));
    }
    return frames;
  }
}

function parseBlock(block: string): SseFrame {
  const frame: SseFrame = { id: null, event: null, data: "" };
  const dataLines: string[] = [];
  for (const line of block.split("\n")) {
    if (line.startsWith("id: ")) frame.id = line.slice(4);
    else if (line.startsWith("event: ")) frame.event = line.slice(7);
    else if (line.startsWith("data: ")) dataLines.push(line.slice(6));
    else if (line.startsWith("data:")) dataLines.push(line.slice(5));
  }
  frame.data = dataLines.join("\n");
  return frame;
}

export interface StreamResult {
  /** True when the server sent its end-of-run frame. */
  ended: boolean;
  framesSeen: number;
}

/**
 * Tails a run's event stream into an EventLog.
 *
 * `connectOnce` consumes one HTTP response to completion or error;
 * `follow` retries until the end frame arrives, resuming from the log's
 * cursor so a dropped connection never duplicates or loses events.
 */
export class EventStreamClient {
  constructor(
    private baseUrl: string,
    private runId: string,
    readonly log: EventLog = new EventLog(),
    private fetchImpl: typeof fetch = fetch,
  ) {}

  async connectOnce(abort?: AbortSignal): Promise<StreamResult> {
    const url = `${this.baseUrl}/runs/${this.runId}/events?from=${this.log.cursor}`;
    const response = await this.fetchImpl(url, { signal: abort });
    if (!response.ok || !response.body) {
      throw new Error(`event stream failed: HTTP ${response.status}`);
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    const parser = new SseParser();
    const result: StreamResult = { ended: false, framesSeen: 0 };
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      for (const frame of parser.push(decoder.decode(value, { stream: true }))) {
        result.framesSeen++;
        if (frame.event === "end") {
          result.ended = true;
          return result;
        }
        if (frame.event === "trace" && frame.data) {
          this.log.add(JSON.parse(frame.data) as TraceEvent);
        }
      }
    }
    return result;
  }

  async follow(maxReconnects = 10): Promise<StreamResult> {
    let last: StreamResult = { ended: false, framesSeen: 0 };
    for (let attempt = 0; attempt <= maxReconnects; attempt++) {
      try {
        last = await this.connectOnce();
      } catch {
        await sleep(100);
        continue;
      }
      if (last.ended) return last;
      await sleep(100);
    }
    return last;
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
