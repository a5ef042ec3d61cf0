// Frame slider / video element synchronization math.

export function timeToFrame(seconds: number, fps: number, frameCount: number): number {
  const frame = Math.floor(seconds * fps);
  return Math.max(0, Math.min(frameCount - 1, frame));
}

export function frameToTime(frame: number, fps: number): number {
  return frame / fps;
}
