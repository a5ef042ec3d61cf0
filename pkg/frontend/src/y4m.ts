// Minimal Y4M reader for mock-codec reconstructions, painted frame by
// frame onto a canvas (4:2:0 converted with BT.601 full-range weights).

export interface Y4mVideo {
  width: number;
  height: number;
  fpsNum: number;
  fpsDen: number;
  mono: boolean;
  frames: Uint8Array[][]; // per frame: [luma] or [luma, u, v]
}

export function parseY4m(buffer: ArrayBuffer): Y4mVideo {
  const bytes = new Uint8Array(buffer);
  const nl = bytes.indexOf(0x0a);
  if (nl < 0) throw new Error("missing Y4M header");
  const header = new TextDecoder().decode(bytes.subarray(0, nl));
  const tokens = header.split(" ");
  if (tokens[0] !== "YUV4MPEG2") throw new Error("not a Y4M stream");
  let width = 0;
  let height = 0;
  let fpsNum = 30;
  let fpsDen = 1;
  let chroma = "420jpeg";
  for (const tok of tokens.slice(1)) {
    if (tok.startsWith("W")) width = parseInt(tok.slice(1), 10);
    else if (tok.startsWith("H")) height = parseInt(tok.slice(1), 10);
    else if (tok.startsWith("F")) {
      const [n, d] = tok.slice(1).split(":");
      fpsNum = parseInt(n, 10);
      fpsDen = parseInt(d, 10);
    } else if (tok.startsWith("C")) chroma = tok.slice(1);
  }
  if (!width || !height) throw new Error("Y4M header missing dimensions");
  const mono = chroma === "mono";
  const lumaBytes = width * height;
  const chromaBytes = mono ? 0 : (width / 2) * (height / 2);
  const frameBytes = lumaBytes + 2 * chromaBytes;

  const frames: Uint8Array[][] = [];
  let pos = nl + 1;
  while (pos < bytes.length) {
    const markerEnd = bytes.indexOf(0x0a, pos);
    if (markerEnd < 0) throw new Error("unterminated FRAME marker");
    pos = markerEnd + 1;
    if (pos + frameBytes > bytes.length) throw new Error("truncated frame payload");
    const luma = bytes.subarray(pos, pos + lumaBytes);
    if (mono) {
      frames.push([luma]);
    } else {
      const u = bytes.subarray(pos + lumaBytes, pos + lumaBytes + chromaBytes);
      const v = bytes.subarray(pos + lumaBytes + chromaBytes, pos + frameBytes);
      frames.push([luma, u, v]);
    }
    pos += frameBytes;
  }
  return { width, height, fpsNum, fpsDen, mono, frames };
}

export function frameToRgba(video: Y4mVideo, index: number): Uint8ClampedArray<ArrayBuffer> {
  const { width, height, mono } = video;
  const planes = video.frames[index];
  const out = new Uint8ClampedArray(width * height * 4);
  const luma = planes[0];
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = y * width + x;
      const o = i * 4;
      const Y = luma[i];
      if (mono) {
        out[o] = out[o + 1] = out[o + 2] = Y;
      } else {
        const ci = (y >> 1) * (width >> 1) + (x >> 1);
        const U = planes[1][ci] - 128;
        const V = planes[2][ci] - 128;
        out[o] = Y + 1.402 * V;
        out[o + 1] = Y - 0.344136 * U - 0.714136 * V;
        out[o + 2] = Y + 1.772 * U;
      }
      out[o + 3] = 255;
    }
  }
  return out;
}
