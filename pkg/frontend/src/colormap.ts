// Importance values render as black-to-red; source edges overlay as
// half-transparent white so the user can line the brush up with content.

export function importanceToRgba(
  values: Uint8Array,
  width: number,
  height: number,
  edges?: Uint8Array,
  edgeThreshold = 64,
): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(width * height * 4);
  for (let i = 0; i < width * height; i++) {
    const v = values[i];
    let r = v;
    let g = 0;
    let b = 0;
    if (edges && edges[i] >= edgeThreshold) {
      r = Math.round(0.5 * r + 127.5);
      g = Math.round(0.5 * g + 127.5);
      b = Math.round(0.5 * b + 127.5);
    }
    const o = i * 4;
    out[o] = r;
    out[o + 1] = g;
    out[o + 2] = b;
    out[o + 3] = 255;
  }
  return out;
}

// Optimistic brush preview: the additive cone the server will apply.
// Discarded as soon as the server returns the authoritative normalized map.
export function previewStroke(
  values: Uint8Array,
  width: number,
  height: number,
  cx: number,
  cy: number,
  radius: number,
  strength: number,
  polarity: "paint" | "erase",
): void {
  const sign = polarity === "paint" ? 1 : -1;
  const x0 = Math.max(0, Math.floor(cx - radius));
  const x1 = Math.min(width - 1, Math.ceil(cx + radius));
  const y0 = Math.max(0, Math.floor(cy - radius));
  const y1 = Math.min(height - 1, Math.ceil(cy + radius));
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      const d = Math.hypot(x - cx, y - cy);
      if (d >= radius) continue;
      const add = sign * Math.round(strength * (1 - d / radius));
      const i = y * width + x;
      values[i] = Math.max(0, Math.min(255, values[i] + add));
    }
  }
}
