import { inflateSync } from "node:zlib";
import { describe, expect, it } from "vitest";
import { encodeMaskPng, decodeMaskPng, bytesToBase64, base64ToBytes } from "../src/png.js";

const PALETTE: [number, number, number][] = [
  [0, 0, 0],
  [230, 60, 60],
  [60, 180, 75],
  [60, 90, 220],
];

function checkerboard(size: number): Uint8Array {
  const raster = new Uint8Array(size * size);
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      raster[y * size + x] = ((x >> 2) + (y >> 2)) % PALETTE.length;
    }
  }
  return raster;
}

describe("indexed PNG codec", () => {
  it("export then import reproduces the raster exactly", () => {
    const raster = checkerboard(64);
    const decoded = decodeMaskPng(encodeMaskPng(raster, 64, PALETTE));
    expect(decoded.size).toBe(64);
    expect(Array.from(decoded.raster)).toEqual(Array.from(raster));
    expect(decoded.palette).toEqual(PALETTE);
  });

  it("re-encoding a decoded mask is byte-identical", () => {
    const raster = checkerboard(32);
    const first = encodeMaskPng(raster, 32, PALETTE);
    const second = encodeMaskPng(decodeMaskPng(first).raster, 32, PALETTE);
    expect(Array.from(second)).toEqual(Array.from(first));
  });

  it("produces a standard PNG that zlib can inflate", () => {
    const raster = checkerboard(16);
    const bytes = encodeMaskPng(raster, 16, PALETTE);
    expect(Array.from(bytes.subarray(0, 4))).toEqual([0x89, 0x50, 0x4e, 0x47]);
    // extract the IDAT chunk and inflate it with node's real zlib
    let pos = 8;
    let idat: Uint8Array | null = null;
    while (pos < bytes.length) {
      const len = (bytes[pos] << 24) | (bytes[pos + 1] << 16) | (bytes[pos + 2] << 8) | bytes[pos + 3];
      const type = String.fromCharCode(bytes[pos + 4], bytes[pos + 5], bytes[pos + 6], bytes[pos + 7]);
      if (type === "IDAT") idat = bytes.subarray(pos + 8, pos + 8 + len);
      pos += 8 + len + 4;
    }
    expect(idat).not.toBeNull();
    const scanlines = inflateSync(idat!);
    expect(scanlines.length).toBe(16 * 17); // filter byte + 16 pixels per row
    for (let y = 0; y < 16; y++) {
      expect(scanlines[y * 17]).toBe(0);
    }
  });

  it("handles rasters larger than one deflate stored block", () => {
    const raster = new Uint8Array(512 * 512).map((_, i) => i % 4);
    const decoded = decodeMaskPng(encodeMaskPng(raster, 512, PALETTE));
    expect(Array.from(decoded.raster)).toEqual(Array.from(raster));
  });

  it("rejects non-PNG bytes and non-square images", () => {
    expect(() => decodeMaskPng(new Uint8Array([1, 2, 3, 4]))).toThrow(/not a PNG/);
    expect(() => encodeMaskPng(new Uint8Array(10), 4, PALETTE)).toThrow(/expected 16/);
  });

  it("base64 helpers round-trip arbitrary bytes", () => {
    const bytes = new Uint8Array(257).map((_, i) => i % 256);
    expect(Array.from(base64ToBytes(bytesToBase64(bytes)))).toEqual(Array.from(bytes));
  });
});
