import { describe, expect, it } from "vitest";
import { NextVideoGate, SessionController, type Scheduler } from "../src/session.js";
import type { StrokePayload } from "../src/protocol.js";

const stroke = (cx: number): StrokePayload => ({
  frame: 0, cx, cy: 10, radius: 5, strength: 64, polarity: "paint",
});

class FakeTransport {
  batches: StrokePayload[][] = [];
  encodes = 0;

  submitStrokes = async (strokes: StrokePayload[]): Promise<ArrayBuffer> => {
    this.batches.push(strokes);
    return new ArrayBuffer(0);
  };

  requestEncode = async (): Promise<string> => {
    this.encodes += 1;
    return `job-${this.encodes}`;
  };

  remainingSeconds = async (): Promise<number> => 0;
}

class ManualScheduler {
  pending: Array<() => void> = [];

  schedule: Scheduler = (fn) => {
    this.pending.push(fn);
    const idx = this.pending.length - 1;
    return () => {
      this.pending[idx] = () => undefined;
    };
  };

  fire(): void {
    const jobs = this.pending;
    this.pending = [];
    jobs.forEach((fn) => fn());
  }
}

describe("NextVideoGate", () => {
  it("enables only when the server reports zero remaining time", () => {
    const gate = new NextVideoGate();
    expect(gate.enabled).toBe(false);   // never enabled before a server report
    gate.update(170);
    expect(gate.enabled).toBe(false);
    gate.update(1);
    expect(gate.enabled).toBe(false);
    gate.update(0);
    expect(gate.enabled).toBe(true);
  });
});

describe("SessionController", () => {
  it("flushes pending strokes before requesting an encode", async () => {
    const transport = new FakeTransport();
    const controller = new SessionController(transport, 0);
    controller.addStroke(stroke(1));
    controller.addStroke(stroke(2));
    expect(controller.pendingCount).toBe(2);
    const jobId = await controller.encode();
    expect(jobId).toBe("job-1");
    expect(transport.batches).toEqual([[stroke(1), stroke(2)]]);
    expect(controller.pendingCount).toBe(0);
  });

  it("auto-triggers an encode after stroke inactivity", async () => {
    const transport = new FakeTransport();
    const scheduler = new ManualScheduler();
    const controller = new SessionController(transport, 2000, scheduler.schedule);
    controller.addStroke(stroke(1));
    controller.addStroke(stroke(2));  // re-arms the timer; first one cancelled
    expect(transport.encodes).toBe(0);
    scheduler.fire();
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(transport.encodes).toBe(1);
    expect(transport.batches.length).toBe(1);
  });

  it("replaces the map through the onMap callback", async () => {
    const transport = new FakeTransport();
    const controller = new SessionController(transport, 0);
    let maps = 0;
    controller.onMap = () => {
      maps += 1;
    };
    controller.addStroke(stroke(1));
    await controller.flush();
    expect(maps).toBe(1);
  });
});
