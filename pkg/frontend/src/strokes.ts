// Pointer-to-stroke mapping and drag sampling.

import type { StrokePayload } from "./protocol.js";

export interface CanvasGeometry {
  // CSS-pixel rectangle the canvas occupies on screen
  left: number;
  top: number;
  displayWidth: number;
  displayHeight: number;
  // video (and map) resolution
  videoWidth: number;
  videoHeight: number;
}

export interface ToolState {
  tool: "brush" | "eraser";
  radius: number;
  strength: number;
  frame: number;
}

// Maps a pointer event position to video pixel coordinates, or null when
// the pointer sits outside the canvas.
export function pointerToVideo(
  geom: CanvasGeometry,
  clientX: number,
  clientY: number,
): { x: number; y: number } | null {
  const relX = clientX - geom.left;
  const relY = clientY - geom.top;
  if (relX < 0 || relY < 0 || relX >= geom.displayWidth || relY >= geom.displayHeight) {
    return null;
  }
  return {
    x: relX * (geom.videoWidth / geom.displayWidth),
    y: relY * (geom.videoHeight / geom.displayHeight),
  };
}

export function makeStroke(tool: ToolState, x: number, y: number): StrokePayload {
  return {
    frame: tool.frame,
    cx: x,
    cy: y,
    radius: tool.radius,
    strength: tool.strength,
    polarity: tool.tool === "brush" ? "paint" : "erase",
  };
}

// Emits one stroke on press and another every radius/2 pixels of travel.
export class DragSampler {
  private lastX = 0;
  private lastY = 0;
  private active = false;

  constructor(private readonly emit: (x: number, y: number) => void) {}

  down(x: number, y: number): void {
    this.active = true;
    this.lastX = x;
    this.lastY = y;
    this.emit(x, y);
  }

  move(x: number, y: number, radius: number): void {
    if (!this.active) return;
    const step = radius / 2;
    let dist = Math.hypot(x - this.lastX, y - this.lastY);
    while (dist >= step) {
      const t = step / dist;
      this.lastX += (x - this.lastX) * t;
      this.lastY += (y - this.lastY) * t;
      this.emit(this.lastX, this.lastY);
      dist = Math.hypot(x - this.lastX, y - this.lastY);
    }
  }

  up(): void {
    this.active = false;
  }
}
