/**
 * Minimal indexed-color (palette) PNG codec for mask import/export.
 *
 * The encoder emits a fully standard PNG: 8-bit color-type-3 scanlines with
 * filter 0, wrapped in a zlib stream of stored (uncompressed) deflate blocks,
 * so any decoder — including the inference service — can read it. The
 * decoder handles exactly what the encoder produces plus any stored-block
 * PNG; compressed imports go through the browser's native decoder in the
 * DOM layer instead.
 */

const PNG_SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    c = CRC_TABLE[(c ^ bytes[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function adler32(bytes: Uint8Array): number {
  let a = 1;
  let b = 0;
  for (let i = 0; i < bytes.length; i++) {
    a = (a + bytes[i]) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

function u32be(value: number): Uint8Array {
  return new Uint8Array([(value >>> 24) & 0xff, (value >>> 16) & 0xff, (value >>> 8) & 0xff, value & 0xff]);
}

function chunk(type: string, data: Uint8Array): Uint8Array {
  const typeBytes = new Uint8Array([...type].map((c) => c.charCodeAt(0)));
  const body = new Uint8Array(typeBytes.length + data.length);
  body.set(typeBytes);
  body.set(data, typeBytes.length);
  const out = new Uint8Array(4 + body.length + 4);
  out.set(u32be(data.length));
  out.set(body, 4);
  out.set(u32be(crc32(body)), 4 + body.length);
  return out;
}

/** zlib stream of stored deflate blocks (max 65535 bytes each). */
function zlibStored(raw: Uint8Array): Uint8Array {
  const blocks: Uint8Array[] = [new Uint8Array([0x78, 0x01])];
  for (let off = 0; off < raw.length || off === 0; off += 65535) {
    const part = raw.subarray(off, Math.min(off + 65535, raw.length));
    const final = off + 65535 >= raw.length ? 1 : 0;
    const len = part.length;
    blocks.push(new Uint8Array([final, len & 0xff, len >> 8, ~len & 0xff, (~len >> 8) & 0xff]));
    blocks.push(part);
    if (final) break;
  }
  blocks.push(u32be(adler32(raw)));
  return concat(blocks);
}

function concat(parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let off = 0;
  for (const p of parts) {
    out.set(p, off);
    off += p.length;
  }
  return out;
}

export function encodeMaskPng(
  raster: Uint8Array,
  size: number,
  palette: [number, number, number][],
): Uint8Array {
  if (raster.length !== size * size) {
    throw new Error(`raster has ${raster.length} pixels, expected ${size * size}`);
  }
  const ihdr = new Uint8Array(13);
  ihdr.set(u32be(size), 0);
  ihdr.set(u32be(size), 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 3; // color type: indexed
  const plte = new Uint8Array(palette.length * 3);
  palette.forEach(([r, g, b], i) => {
    plte[3 * i] = r;
    plte[3 * i + 1] = g;
    plte[3 * i + 2] = b;
  });
  const scanlines = new Uint8Array(size * (size + 1));
  for (let y = 0; y < size; y++) {
    scanlines[y * (size + 1)] = 0; // filter: none
    scanlines.set(raster.subarray(y * size, (y + 1) * size), y * (size + 1) + 1);
  }
  return concat([
    new Uint8Array(PNG_SIGNATURE),
    chunk("IHDR", ihdr),
    chunk("PLTE", plte),
    chunk("IDAT", zlibStored(scanlines)),
    chunk("IEND", new Uint8Array(0)),
  ]);
}

export interface DecodedMask {
  raster: Uint8Array;
  size: number;
  palette: [number, number, number][];
}

function inflateStored(stream: Uint8Array): Uint8Array {
  if (stream.length < 6) throw new Error("zlib stream too short");
  if ((stream[0] & 0x0f) !== 8) throw new Error("not a zlib deflate stream");
  const parts: Uint8Array[] = [];
  let pos = 2;
  for (;;) {
    const header = stream[pos];
    if ((header & 0x06) !== 0) {
      throw new Error("compressed PNG import is handled by the browser decoder, not this codec");
    }
    const len = stream[pos + 1] | (stream[pos + 2] << 8);
    parts.push(stream.subarray(pos + 5, pos + 5 + len));
    pos += 5 + len;
    if (header & 1) break;
  }
  return concat(parts);
}

export function decodeMaskPng(bytes: Uint8Array): DecodedMask {
  for (let i = 0; i < PNG_SIGNATURE.length; i++) {
    if (bytes[i] !== PNG_SIGNATURE[i]) throw new Error("not a PNG file");
  }
  let pos = 8;
  let size = 0;
  let palette: [number, number, number][] = [];
  const idat: Uint8Array[] = [];
  while (pos < bytes.length) {
    const len = (bytes[pos] << 24) | (bytes[pos + 1] << 16) | (bytes[pos + 2] << 8) | bytes[pos + 3];
    const type = String.fromCharCode(bytes[pos + 4], bytes[pos + 5], bytes[pos + 6], bytes[pos + 7]);
    const data = bytes.subarray(pos + 8, pos + 8 + len);
    if (type === "IHDR") {
      const width = (data[0] << 24) | (data[1] << 16) | (data[2] << 8) | data[3];
      const height = (data[4] << 24) | (data[5] << 16) | (data[6] << 8) | data[7];
      if (width !== height) throw new Error(`mask must be square, got ${width}x${height}`);
      if (data[8] !== 8 || data[9] !== 3) throw new Error("mask PNG must be 8-bit indexed color");
      size = width;
    } else if (type === "PLTE") {
      palette = [];
      for (let i = 0; i + 2 < data.length; i += 3) {
        palette.push([data[i], data[i + 1], data[i + 2]]);
      }
    } else if (type === "IDAT") {
      idat.push(data);
    } else if (type === "IEND") {
      break;
    }
    pos += 8 + len + 4;
  }
  if (size === 0) throw new Error("missing IHDR chunk");
  const scanlines = inflateStored(concat(idat));
  const raster = new Uint8Array(size * size);
  for (let y = 0; y < size; y++) {
    if (scanlines[y * (size + 1)] !== 0) {
      throw new Error("only filter-0 scanlines are supported");
    }
    raster.set(scanlines.subarray(y * (size + 1) + 1, (y + 1) * (size + 1)), y * size);
  }
  return { raster, size, palette };
}

const B64_ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

export function bytesToBase64(bytes: Uint8Array): string {
  let out = "";
  for (let i = 0; i < bytes.length; i += 3) {
    const b0 = bytes[i];
    const b1 = i + 1 < bytes.length ? bytes[i + 1] : 0;
    const b2 = i + 2 < bytes.length ? bytes[i + 2] : 0;
    out += B64_ALPHABET[b0 >> 2];
    out += B64_ALPHABET[((b0 & 3) << 4) | (b1 >> 4)];
    out += i + 1 < bytes.length ? B64_ALPHABET[((b1 & 15) << 2) | (b2 >> 6)] : "=";
    out += i + 2 < bytes.length ? B64_ALPHABET[b2 & 63] : "=";
  }
  return out;
}

export function base64ToBytes(b64: string): Uint8Array {
  const clean = b64.replace(/=+$/, "");
  const out = new Uint8Array(Math.floor((clean.length * 3) / 4));
  let acc = 0;
  let bits = 0;
  let j = 0;
  for (const ch of clean) {
    const val = B64_ALPHABET.indexOf(ch);
    if (val < 0) throw new Error(`invalid base64 character ${JSON.stringify(ch)}`);
    acc = (acc << 6) | val;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out[j++] = (acc >> bits) & 0xff;
    }
  }
  return out;
}
