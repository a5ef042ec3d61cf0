// Client-side session state: pending-stroke queue, encode scheduling and
// the server-driven Next Video gate.

import type { StrokePayload } from "./protocol.js";

export interface SessionTransport {
  submitStrokes(strokes: StrokePayload[]): Promise<ArrayBuffer>;
  requestEncode(): Promise<string>; // job id
  remainingSeconds(): Promise<number>;
}

export type Scheduler = (fn: () => void, ms: number) => () => void;

const defaultScheduler: Scheduler = (fn, ms) => {
  const id = setTimeout(fn, ms);
  return () => clearTimeout(id);
};

export class SessionController {
  private pending: StrokePayload[] = [];
  private flushing = false;
  private cancelAuto: (() => void) | null = null;
  private encodeInFlight = false;
  onMap: ((map: ArrayBuffer) => void) | null = null;
  onEncodeRequested: ((jobId: string) => void) | null = null;

  constructor(
    private readonly transport: SessionTransport,
    private readonly autoEncodeMs: number = 2000,
    private readonly scheduler: Scheduler = defaultScheduler,
  ) {}

  get pendingCount(): number {
    return this.pending.length;
  }

  addStroke(stroke: StrokePayload): void {
    this.pending.push(stroke);
    this.armAutoEncode();
  }

  private armAutoEncode(): void {
    if (this.autoEncodeMs <= 0) return;
    this.cancelAuto?.();
    this.cancelAuto = this.scheduler(() => {
      void this.encode();
    }, this.autoEncodeMs);
  }

  // Sends queued strokes; the returned map is authoritative and replaces
  // any optimistic preview.
  async flush(): Promise<void> {
    if (this.flushing) return;
    this.flushing = true;
    try {
      while (this.pending.length > 0) {
        const batch = this.pending;
        this.pending = [];
        const map = await this.transport.submitStrokes(batch);
        this.onMap?.(map);
      }
    } finally {
      this.flushing = false;
    }
  }

  // Pending strokes always flush before an encode request goes out.
  async encode(): Promise<string | null> {
    this.cancelAuto?.();
    this.cancelAuto = null;
    if (this.encodeInFlight) return null;
    this.encodeInFlight = true;
    try {
      await this.flush();
      const jobId = await this.transport.requestEncode();
      this.onEncodeRequested?.(jobId);
      return jobId;
    } finally {
      this.encodeInFlight = false;
    }
  }
}

// The Next Video button is enabled purely by the server-reported
// remaining time, never by the client clock.
export class NextVideoGate {
  private remaining = Infinity;

  update(serverRemainingSeconds: number): void {
    this.remaining = serverRemainingSeconds;
  }

  get enabled(): boolean {
    return this.remaining <= 0;
  }
}
