// Thin fetch client for the annotation service.

import type { JobStatus, SessionInfo, StrokePayload, VideoInfo } from "./protocol.js";

export class ApiClient {
  constructor(private readonly base: string = "") {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.base + path, init);
    if (!res.ok) {
      const body = await res.text();
      throw new Error(`${init?.method ?? "GET"} ${path} -> ${res.status}: ${body}`);
    }
    return (await res.json()) as T;
  }

  private async binary(path: string, init?: RequestInit): Promise<ArrayBuffer> {
    const res = await fetch(this.base + path, init);
    if (!res.ok) {
      throw new Error(`${init?.method ?? "GET"} ${path} -> ${res.status}`);
    }
    return res.arrayBuffer();
  }

  listVideos(): Promise<VideoInfo[]> {
    return this.json("/videos");
  }

  async createSession(videoId: string, userId: string): Promise<string> {
    const body = JSON.stringify({ video_id: videoId, user_id: userId });
    const out = await this.json<{ session_id: string }>("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body,
    });
    return out.session_id;
  }

  sessionInfo(sessionId: string): Promise<SessionInfo> {
    return this.json(`/sessions/${sessionId}`);
  }

  getMap(sessionId: string): Promise<ArrayBuffer> {
    return this.binary(`/sessions/${sessionId}/map`);
  }

  getEdges(sessionId: string, frame: number): Promise<ArrayBuffer> {
    return this.binary(`/sessions/${sessionId}/edges/${frame}`);
  }

  submitStrokes(sessionId: string, strokes: StrokePayload[]): Promise<ArrayBuffer> {
    return this.binary(`/sessions/${sessionId}/strokes`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(strokes),
    });
  }

  async requestEncode(sessionId: string): Promise<string> {
    const out = await this.json<{ job_id: string }>(
      `/sessions/${sessionId}/encode`, { method: "POST" });
    return out.job_id;
  }

  jobStatus(sessionId: string, jobId: string): Promise<JobStatus> {
    return this.json(`/sessions/${sessionId}/encode/${jobId}`);
  }

  getVideo(sessionId: string): Promise<ArrayBuffer> {
    return this.binary(`/sessions/${sessionId}/video`);
  }

  async finalize(sessionId: string): Promise<string> {
    const out = await this.json<{ path: string }>(
      `/sessions/${sessionId}/finalize`, { method: "POST" });
    return out.path;
  }
}
