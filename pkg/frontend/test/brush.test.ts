import { describe, expect, it } from "vitest";
import { stampDisc, stampStroke } from "../src/brush.js";

describe("stampDisc", () => {
  it("radius 1 paints exactly one pixel", () => {
    const raster = new Uint8Array(8 * 8);
    stampDisc(raster, 8, 3, 4, 1, 2);
    expect(raster[4 * 8 + 3]).toBe(2);
    expect(raster.reduce((n, v) => n + (v !== 0 ? 1 : 0), 0)).toBe(1);
  });

  it("larger radii paint a symmetric disc", () => {
    const raster = new Uint8Array(16 * 16);
    stampDisc(raster, 16, 8, 8, 3, 1);
    // r = 2: 13-pixel plus-shaped disc
    expect(raster.reduce((n, v) => n + v, 0)).toBe(13);
    expect(raster[8 * 16 + 6]).toBe(1);
    expect(raster[8 * 16 + 10]).toBe(1);
    expect(raster[6 * 16 + 8]).toBe(1);
    expect(raster[8 * 16 + 5]).toBe(0);
  });

  it("clips at the canvas edge without wrapping", () => {
    const raster = new Uint8Array(8 * 8);
    stampDisc(raster, 8, 0, 0, 3, 1);
    // nothing on opposite edges
    for (let i = 0; i < 8; i++) {
      expect(raster[i * 8 + 7]).toBe(0);
      expect(raster[7 * 8 + i]).toBe(0);
    }
    expect(raster[0]).toBe(1);
  });
});

describe("stampStroke", () => {
  it("leaves no gaps on a fast diagonal drag", () => {
    const raster = new Uint8Array(32 * 32);
    stampStroke(raster, 32, { points: [{ x: 2, y: 2 }, { x: 29, y: 29 }] }, 1, 1);
    for (let i = 2; i <= 29; i++) {
      expect(raster[i * 32 + i]).toBe(1);
    }
  });

  it("a single-point stroke equals a disc stamp", () => {
    const a = new Uint8Array(16 * 16);
    const b = new Uint8Array(16 * 16);
    stampStroke(a, 16, { points: [{ x: 7, y: 5 }] }, 4, 3);
    stampDisc(b, 16, 7, 5, 4, 3);
    expect(Array.from(a)).toEqual(Array.from(b));
  });

  it("an empty stroke paints nothing", () => {
    const raster = new Uint8Array(8 * 8);
    stampStroke(raster, 8, { points: [] }, 4, 3);
    expect(raster.every((v) => v === 0)).toBe(true);
  });
});
