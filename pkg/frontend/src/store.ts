import type { TraceEvent } from "./types.js";

/**
 * Ordered, deduplicated event log for one run.
 *
 * Events arrive over SSE and may repeat after a reconnect replay; the log
 * keys on the per-run sequence number so each event lands exactly once,
 * in order, no matter how the stream is chopped up.
 */
export class EventLog {
  private seen = new Set<number>();
  private events: TraceEvent[] = [];
  private listeners: Array<(event: TraceEvent) => void> = [];

  /** Highest sequence accepted so far; -1 when empty. */
  get lastSequence(): number {
    const last = this.events[this.events.length - 1];
    return last ? last.sequence : -1;
  }

  get size(): number {
    return this.events.length;
  }

  /** Next sequence to request on reconnect (`?from=`). */
  get cursor(): number {
    return this.lastSequence + 1;
  }

  add(event: TraceEvent): boolean {
    if (this.seen.has(event.sequence)) return false;
    this.seen.add(event.sequence);
    // Insertion point from the back; replays keep the log sorted.
    let i = this.events.length;
    while (i > 0 && this.events[i - 1]!.sequence > event.sequence) i--;
    this.events.splice(i, 0, event);
    for (const listener of this.listeners) listener(event);
    return true;
  }

  all(): readonly TraceEvent[] {
    return this.events;
  }

  byKind(kind: string): TraceEvent[] {
    return this.events.filter((e) => e.kind === kind);
  }

  onEvent(listener: (event: TraceEvent) => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }
}

/** One line of the rendered transcript, ready for a list view. */
export interface TranscriptLine {
  sequence: number;
  label: string;
  text: string;
}

export function renderLine(event: TraceEvent): TranscriptLine {
  const p = event.payload;
  switch (event.kind) {
    case "inference": {
      const calls = (p.tool_calls as string[] | undefined) ?? [];
      const suffix = calls.length ? ` → ${calls.join(", ")}` : "";
      return {
        sequence: event.sequence,
        label: `${p.agent}`,
        text: `${p.content ?? ""}${suffix}`.trim(),
      };
    }
    case "tool_call":
      return {
        sequence: event.sequence,
        label: `tool ${p.tool}`,
        text: String(p.output ?? ""),
      };
    case "handoff":
      return {
        sequence: event.sequence,
        label: "handoff",
        text: `${p.from} → ${p.to} (${p.policy})`,
      };
    case "interrupt":
      return { sequence: event.sequence, label: "interrupt", text: "run aborted by operator" };
    case "governor":
      return {
        sequence: event.sequence,
        label: "governor",
        text: p.breach ? `breach: ${p.breach}` : `warning: ${p.warning ?? p.error}`,
      };
    case "operator":
      return { sequence: event.sequence, label: "operator", text: String(p.action ?? "") };
    default:
      return { sequence: event.sequence, label: event.kind, text: JSON.stringify(p) };
  }
}

export function renderTranscript(log: EventLog): TranscriptLine[] {
  return log.all().map(renderLine);
}
