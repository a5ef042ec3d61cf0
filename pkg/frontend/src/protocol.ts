// Binary payload parsing for the annotation service API.

export interface ImportanceMap {
  width: number;
  height: number;
  frameCount: number;
  // one Uint8Array per frame, row-major width*height
  frames: Uint8Array[];
}

const VIMP_MAGIC = 0x504d4956; // "VIMP" little-endian
const VIMP_VERSION = 1;

export function parseVimp(buffer: ArrayBuffer): ImportanceMap {
  const view = new DataView(buffer);
  if (buffer.byteLength < 20) {
    throw new Error("importance map payload truncated");
  }
  if (view.getUint32(0, true) !== VIMP_MAGIC) {
    throw new Error("bad importance map magic");
  }
  if (view.getUint32(4, true) !== VIMP_VERSION) {
    throw new Error("unsupported importance map version");
  }
  const width = view.getUint32(8, true);
  const height = view.getUint32(12, true);
  const frameCount = view.getUint32(16, true);
  const frameBytes = width * height;
  const expected = 20 + frameBytes * frameCount;
  if (buffer.byteLength !== expected) {
    throw new Error(
      `importance map payload is ${buffer.byteLength} bytes, expected ${expected}`,
    );
  }
  const frames: Uint8Array[] = [];
  for (let f = 0; f < frameCount; f++) {
    frames.push(new Uint8Array(buffer, 20 + f * frameBytes, frameBytes));
  }
  return { width, height, frameCount, frames };
}

export interface VideoInfo {
  id: string;
  width: number;
  height: number;
  frames: number;
  fps: number;
  fps_num: number;
  fps_den: number;
  bitrate: number;
}

export interface SessionInfo {
  session_id: string;
  video_id: string;
  user_id: string;
  created_at: number;
  finalized: boolean;
  remaining_seconds: number;
  iterations: number;
  stroke_count: number;
}

export interface StrokePayload {
  frame: number;
  cx: number;
  cy: number;
  radius: number;
  strength: number;
  polarity: "paint" | "erase";
}

export interface JobStatus {
  job_id: string;
  state: "queued" | "running" | "done" | "failed";
  iteration: number;
  error?: string;
  stats?: {
    base_qp: number | null;
    total_bits: number;
    psnr: number | null;
    lossless: boolean;
    iteration: number;
  };
}
