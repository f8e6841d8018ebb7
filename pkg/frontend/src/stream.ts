// Event stream reader. The server emits one event per line, prefixed by
// its eventSeq; we read it through fetch + ReadableStream and resubscribe
// from the last seen seq after any drop, so no event is ever missed.

export interface EventRecord {
  eventSeq: number;
  kind: string;
  payload: Record<string, any>;
}

export type ConnectionState = "connecting" | "live" | "lost";

export interface StreamHandle {
  stop(): void;
}

export function splitLines(buffer: string): { lines: string[]; rest: string } {
  const parts = buffer.split("\n");
  const rest = parts.pop() ?? "";
  return { lines: parts.filter((line) => line.trim().length > 0), rest };
}

export function parseEventLine(line: string): EventRecord | null {
  const space = line.indexOf(" ");
  if (space <= 0) return null;
  const seq = Number(line.slice(0, space));
  if (!Number.isInteger(seq)) return null;
  try {
    const record = JSON.parse(line.slice(space + 1));
    if (typeof record !== "object" || record === null) return null;
    if (record.eventSeq !== seq) return null;
    return record as EventRecord;
  } catch {
    return null;
  }
}

export function subscribeEvents(
  baseUrl: string,
  sinceSeq: number,
  onEvent: (event: EventRecord) => void,
  onState: (state: ConnectionState) => void = () => {},
  fetchFn: typeof fetch = (...args) => fetch(...args),
  retryDelayMs = 1000,
): StreamHandle {
  let stopped = false;
  let since = sinceSeq;
  let controller = new AbortController();

  async function readOnce(): Promise<void> {
    onState("connecting");
    controller = new AbortController();
    const response = await fetchFn(`${baseUrl}/events?since=${since}`, {
      signal: controller.signal,
    });
    if (!response.ok || !response.body) {
      throw new Error(`stream rejected: ${response.status}`);
    }
    onState("live");
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) return;
      buffer += decoder.decode(value, { stream: true });
      const { lines, rest } = splitLines(buffer);
      buffer = rest;
      for (const line of lines) {
        const event = parseEventLine(line);
        if (event && event.eventSeq > since) {
          since = event.eventSeq;
          onEvent(event);
        }
      }
    }
  }

  (async () => {
    while (!stopped) {
      try {
        await readOnce();
      } catch {
        // fall through to retry
      }
      if (stopped) break;
      onState("lost");
      await new Promise((resolve) => setTimeout(resolve, retryDelayMs));
    }
  })();

  return {
    stop() {
      stopped = true;
      controller.abort();
    },
  };
}
