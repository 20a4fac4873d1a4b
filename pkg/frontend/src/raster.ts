// Frame payload parsing and pixel conversion.
//
// Every pixel shown in the editor originates from server payload bytes;
// the only client-side transform is a fixed grayscale lookup (identity
// on raster payloads, min/max normalization for float payloads when a
// raster was not requested). No physics happens here.

import type { FramePayload } from "./types.js";

const HEADER_BYTES = 12;

export function parseFramePayload(buf: ArrayBuffer, format: "bin" | "raster"): FramePayload {
  if (buf.byteLength < HEADER_BYTES) {
    throw new Error(`frame payload too short: ${buf.byteLength} bytes`);
  }
  const header = new DataView(buf, 0, HEADER_BYTES);
  const nx = header.getUint32(0, true);
  const ny = header.getUint32(4, true);
  const channels = header.getUint32(8, true);
  const cells = nx * ny * channels;
  const body = buf.slice(HEADER_BYTES);
  if (format === "raster") {
    if (body.byteLength !== cells) {
      throw new Error(`raster payload holds ${body.byteLength} bytes, expected ${cells}`);
    }
    return { nx, ny, channels, bytes: new Uint8Array(body), floats: null };
  }
  if (body.byteLength !== 4 * cells) {
    throw new Error(`bin payload holds ${body.byteLength} bytes, expected ${4 * cells}`);
  }
  return { nx, ny, channels, bytes: null, floats: new Float32Array(body) };
}

// RGBA pixels for a single-channel payload, y flipped so +y points up
// on screen. Raster bytes pass through the identity LUT untouched.
export function toRgba(frame: FramePayload, channel = 0): Uint8ClampedArray<ArrayBuffer> {
  const { nx, ny, channels } = frame;
  const out = new Uint8ClampedArray(new ArrayBuffer(nx * ny * 4));
  const plane = channel * nx * ny;
  let gray: (i: number) => number;
  if (frame.bytes) {
    const bytes = frame.bytes;
    gray = (i) => bytes[plane + i];
  } else if (frame.floats) {
    const floats = frame.floats;
    let lo = Infinity;
    let hi = -Infinity;
    for (let i = 0; i < nx * ny; i++) {
      const v = floats[plane + i];
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
    const span = hi > lo ? hi - lo : 1;
    gray = (i) => Math.round(((floats[plane + i] - lo) / span) * 255);
  } else {
    throw new Error("empty frame payload");
  }
  for (let j = 0; j < ny; j++) {
    const srcRow = (ny - 1 - j) * nx;
    for (let i = 0; i < nx; i++) {
      const g = gray(srcRow + i);
      const at = (j * nx + i) * 4;
      out[at] = g;
      out[at + 1] = g;
      out[at + 2] = g;
      out[at + 3] = 255;
    }
  }
  return out;
}
