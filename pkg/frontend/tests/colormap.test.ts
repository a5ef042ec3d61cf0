import { describe, expect, it } from "vitest";
import { importanceToRgba, previewStroke } from "../src/colormap.js";

describe("importanceToRgba", () => {
  it("maps 0 to black and 255 to pure red", () => {
    const rgba = importanceToRgba(new Uint8Array([0, 255]), 2, 1);
    expect([rgba[0], rgba[1], rgba[2], rgba[3]]).toEqual([0, 0, 0, 255]);
    expect([rgba[4], rgba[5], rgba[6], rgba[7]]).toEqual([255, 0, 0, 255]);
  });

  it("blends edge pixels 50% toward white", () => {
    const values = new Uint8Array([127]);
    const edges = new Uint8Array([200]);
    const rgba = importanceToRgba(values, 1, 1, edges, 64);
    expect([rgba[0], rgba[1], rgba[2]]).toEqual([191, 128, 128]);
  });

  it("leaves sub-threshold edge pixels untouched", () => {
    const rgba = importanceToRgba(new Uint8Array([127]), 1, 1, new Uint8Array([10]), 64);
    expect([rgba[0], rgba[1], rgba[2]]).toEqual([127, 0, 0]);
  });
});

describe("previewStroke", () => {
  it("applies the additive cone with clamping", () => {
    const values = new Uint8Array(11 * 11).fill(127);
    previewStroke(values, 11, 11, 5, 5, 5, 64, "paint");
    expect(values[5 * 11 + 5]).toBe(191);          // center +64
    expect(values[5 * 11 + 0]).toBe(127);          // at radius: unchanged
    expect(values[5 * 11 + 7]).toBe(127 + Math.round(64 * (1 - 2 / 5)));
    previewStroke(values, 11, 11, 5, 5, 5, 64, "erase");
    expect(values[5 * 11 + 5]).toBe(127);          // erase undoes paint
  });
});
