// Browser entry point: side-by-side reconstruction and annotation canvas
// with brush/eraser tools, frame slider, edge overlay, re-encode and the
// timed Next Video button.

import { ApiClient } from "./api.js";
import { importanceToRgba, previewStroke } from "./colormap.js";
import { parseVimp, type ImportanceMap, type VideoInfo } from "./protocol.js";
import { NextVideoGate, SessionController } from "./session.js";
import { DragSampler, makeStroke, pointerToVideo, type ToolState } from "./strokes.js";
import { frameToTime, timeToFrame } from "./playback.js";
import { frameToRgba, parseY4m, type Y4mVideo } from "./y4m.js";

const api = new ApiClient("");

interface AppState {
  video: VideoInfo;
  sessionId: string;
  map: ImportanceMap | null;
  preview: Uint8Array | null; // optimistic copy of the current frame's map
  edges: Map<number, Uint8Array>;
  recon: Y4mVideo | null;
  frame: number;
  playing: boolean;
  tool: ToolState;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function start(): Promise<void> {
  const videos = await api.listVideos();
  if (videos.length === 0) {
    el<HTMLDivElement>("status").textContent =
      "No videos ingested. Run: vimp ingest --y4m <file> --id <name> --bitrate <bps>";
    return;
  }
  const video = videos[0];
  const userId = localStorage.getItem("vimp-user")
    ?? crypto.randomUUID().slice(0, 12);
  localStorage.setItem("vimp-user", userId);
  const sessionId = await api.createSession(video.id, userId);

  const state: AppState = {
    video,
    sessionId,
    map: null,
    preview: null,
    edges: new Map(),
    recon: null,
    frame: 0,
    playing: false,
    tool: { tool: "brush", radius: 24, strength: 64, frame: 0 },
  };

  const videoCanvas = el<HTMLCanvasElement>("video-canvas");
  const mapCanvas = el<HTMLCanvasElement>("map-canvas");
  videoCanvas.width = mapCanvas.width = video.width;
  videoCanvas.height = mapCanvas.height = video.height;
  const videoCtx = videoCanvas.getContext("2d")!;
  const mapCtx = mapCanvas.getContext("2d")!;

  const slider = el<HTMLInputElement>("frame-slider");
  slider.max = String(video.frames - 1);
  const frameLabel = el<HTMLSpanElement>("frame-label");
  const status = el<HTMLDivElement>("status");
  const nextBtn = el<HTMLButtonElement>("next-video");
  const gate = new NextVideoGate();

  const controller = new SessionController({
    submitStrokes: (strokes) => api.submitStrokes(sessionId, strokes),
    requestEncode: () => api.requestEncode(sessionId),
    remainingSeconds: async () => (await api.sessionInfo(sessionId)).remaining_seconds,
  });

  function drawVideo(): void {
    if (!state.recon) return;
    const idx = Math.min(state.frame, state.recon.frames.length - 1);
    videoCtx.putImageData(
      new ImageData(frameToRgba(state.recon, idx), state.recon.width,
                    state.recon.height), 0, 0);
  }

  function drawMap(): void {
    if (!state.map) return;
    const values = state.preview ?? state.map.frames[state.frame];
    const rgba = importanceToRgba(values, state.map.width, state.map.height,
                                  state.edges.get(state.frame));
    mapCtx.putImageData(new ImageData(rgba, state.map.width, state.map.height), 0, 0);
  }

  function setFrame(frame: number): void {
    state.frame = Math.max(0, Math.min(video.frames - 1, frame));
    state.tool.frame = state.frame;
    state.preview = null;
    slider.value = String(state.frame);
    frameLabel.textContent = `${state.frame + 1}/${video.frames}`;
    if (!state.edges.has(state.frame)) {
      void api.getEdges(sessionId, state.frame).then((buf) => {
        state.edges.set(state.frame, new Uint8Array(buf));
        drawMap();
      });
    }
    drawVideo();
    drawMap();
  }

  controller.onMap = (buf) => {
    state.map = parseVimp(buf);
    state.preview = null;
    drawMap();
  };

  function showReconstruction(buf: ArrayBuffer): void {
    try {
      state.recon = parseY4m(buf);
      drawVideo();
    } catch {
      // external-codec bitstream: hand it to the native video element
      const element = document.createElement("video");
      element.controls = true;
      element.width = video.width;
      element.height = video.height;
      element.src = URL.createObjectURL(new Blob([buf]));
      videoCanvas.replaceWith(element);
    }
  }

  controller.onEncodeRequested = (jobId) => {
    status.textContent = "encoding...";
    const poll = async (): Promise<void> => {
      const job = await api.jobStatus(sessionId, jobId);
      if (job.state === "done") {
        showReconstruction(await api.getVideo(sessionId));
        status.textContent = job.stats
          ? `encode #${job.stats.iteration}: ${job.stats.total_bits} bits, ` +
            `PSNR ${job.stats.lossless ? "lossless" : job.stats.psnr?.toFixed(2)}`
          : "encode done";
      } else if (job.state === "failed") {
        status.textContent = `encode failed: ${job.error}`;
      } else {
        setTimeout(() => void poll(), 500);
      }
    };
    void poll();
  };

  // initial assets
  api.getMap(sessionId).then((buf) => {
    state.map = parseVimp(buf);
    drawMap();
  });
  api.getVideo(sessionId).then(showReconstruction).catch(() => {
    status.textContent = "baseline encode not ready yet";
  });
  setFrame(0);

  // painting
  const sampler = new DragSampler((x, y) => {
    const stroke = makeStroke(state.tool, x, y);
    controller.addStroke(stroke);
    if (state.map) {
      if (!state.preview) {
        state.preview = new Uint8Array(state.map.frames[state.frame]);
      }
      previewStroke(state.preview, state.map.width, state.map.height,
                    x, y, stroke.radius, stroke.strength, stroke.polarity);
      drawMap();
    }
  });

  function geometry() {
    const rect = mapCanvas.getBoundingClientRect();
    return {
      left: rect.left,
      top: rect.top,
      displayWidth: rect.width,
      displayHeight: rect.height,
      videoWidth: video.width,
      videoHeight: video.height,
    };
  }

  mapCanvas.addEventListener("pointerdown", (ev) => {
    const pos = pointerToVideo(geometry(), ev.clientX, ev.clientY);
    if (pos) sampler.down(pos.x, pos.y);
  });
  mapCanvas.addEventListener("pointermove", (ev) => {
    const pos = pointerToVideo(geometry(), ev.clientX, ev.clientY);
    if (pos) sampler.move(pos.x, pos.y, state.tool.radius);
  });
  window.addEventListener("pointerup", () => {
    sampler.up();
    void controller.flush();
  });

  // toolbar
  el<HTMLButtonElement>("tool-brush").addEventListener("click", () => {
    state.tool.tool = "brush";
  });
  el<HTMLButtonElement>("tool-eraser").addEventListener("click", () => {
    state.tool.tool = "eraser";
  });
  const radius = el<HTMLInputElement>("brush-radius");
  radius.addEventListener("input", () => {
    state.tool.radius = Number(radius.value);
  });
  el<HTMLButtonElement>("encode").addEventListener("click", () => {
    void controller.encode();
  });

  // playback: scrubbing pauses playback
  slider.addEventListener("input", () => {
    state.playing = false;
    setFrame(Number(slider.value));
  });
  el<HTMLButtonElement>("play").addEventListener("click", () => {
    state.playing = !state.playing;
  });
  let clock = 0;
  setInterval(() => {
    if (!state.playing) return;
    clock += 0.1;
    const frame = timeToFrame(clock, video.fps, video.frames);
    if (frame !== state.frame) setFrame(frame);
    if (frame >= video.frames - 1) clock = 0;
  }, 100);
  slider.addEventListener("change", () => {
    clock = frameToTime(state.frame, video.fps);
  });

  // Next Video gating is server-driven
  nextBtn.disabled = true;
  setInterval(() => {
    void api.sessionInfo(sessionId).then((info) => {
      gate.update(info.remaining_seconds);
      nextBtn.disabled = !gate.enabled;
      if (!gate.enabled) {
        nextBtn.textContent = `Next Video (${info.remaining_seconds}s)`;
      } else {
        nextBtn.textContent = "Next Video";
      }
    });
  }, 1000);
  nextBtn.addEventListener("click", () => {
    void controller.flush()
      .then(() => api.finalize(sessionId))
      .then((path) => {
        status.textContent = `final map saved: ${path}`;
        nextBtn.disabled = true;
      });
  });
}

void start();
