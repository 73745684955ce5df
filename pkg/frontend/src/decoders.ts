import { ByteStream } from "./bytes.js";
import { FramebufferMirror, Rect } from "./framebuffer.js";
import { Inflater } from "./inflate.js";
import { PixelFormat, bytesPerPixel, pixelAt } from "./pixfmt.js";

export const ENC_RAW = 0;
export const ENC_COPYRECT = 1;
export const ENC_RRE = 2;
export const ENC_HEXTILE = 5;
export const ENC_ZLIB = 6;

export const SUPPORTED_ENCODINGS = [ENC_RAW, ENC_COPYRECT, ENC_RRE, ENC_HEXTILE, ENC_ZLIB];

function valuesFromWire(fmt: PixelFormat, data: Uint8Array, count: number): Uint32Array {
  const bpp = bytesPerPixel(fmt);
  const out = new Uint32Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = pixelAt(fmt, data, i * bpp);
  }
  return out;
}

export function applyRawBytes(mirror: FramebufferMirror, rect: Rect, data: Uint8Array): void {
  const expected = rect.w * rect.h * bytesPerPixel(mirror.format);
  if (data.length !== expected) {
    throw new Error(`raw payload is ${data.length} bytes, expected ${expected}`);
  }
  mirror.setPixels(rect, valuesFromWire(mirror.format, data, rect.w * rect.h));
}

export async function decodeRaw(stream: ByteStream, rect: Rect, mirror: FramebufferMirror): Promise<void> {
  const data = await stream.readExact(rect.w * rect.h * bytesPerPixel(mirror.format));
  applyRawBytes(mirror, rect, data);
}

export async function decodeCopyRect(
  stream: ByteStream,
  rect: Rect,
  mirror: FramebufferMirror,
): Promise<void> {
  const srcX = await stream.readU16();
  const srcY = await stream.readU16();
  mirror.copyRect(rect, srcX, srcY);
}

export async function decodeRre(stream: ByteStream, rect: Rect, mirror: FramebufferMirror): Promise<void> {
  const fmt = mirror.format;
  const bpp = bytesPerPixel(fmt);
  const count = await stream.readU32();
  const background = pixelAt(fmt, await stream.readExact(bpp), 0);
  mirror.fillRect(rect, background);
  for (let i = 0; i < count; i++) {
    const color = pixelAt(fmt, await stream.readExact(bpp), 0);
    const body = await stream.readExact(8);
    const x = (body[0] << 8) | body[1];
    const y = (body[2] << 8) | body[3];
    const w = (body[4] << 8) | body[5];
    const h = (body[6] << 8) | body[7];
    if (w < 1 || h < 1 || x + w > rect.w || y + h > rect.h) {
      throw new Error(`rre subrect (${x},${y},${w},${h}) escapes ${rect.w}x${rect.h} rect`);
    }
    mirror.fillRect({ x: rect.x + x, y: rect.y + y, w, h }, color);
  }
}

const HEXTILE_RAW = 1;
const HEXTILE_BACKGROUND = 2;
const HEXTILE_FOREGROUND = 4;
const HEXTILE_SUBRECTS = 8;
const HEXTILE_COLOURED = 16;

export function hextileTiles(rect: Rect): Rect[] {
  const tiles: Rect[] = [];
  for (let ty = rect.y; ty < rect.y + rect.h; ty += 16) {
    const th = Math.min(16, rect.y + rect.h - ty);
    for (let tx = rect.x; tx < rect.x + rect.w; tx += 16) {
      tiles.push({ x: tx, y: ty, w: Math.min(16, rect.x + rect.w - tx), h: th });
    }
  }
  return tiles;
}

export async function decodeHextile(
  stream: ByteStream,
  rect: Rect,
  mirror: FramebufferMirror,
): Promise<void> {
  const fmt = mirror.format;
  const bpp = bytesPerPixel(fmt);
  // carried colours persist across tiles within one rectangle only
  let background: number | null = null;
  let foreground: number | null = null;
  for (const tile of hextileTiles(rect)) {
    const mask = await stream.readU8();
    if (mask & HEXTILE_RAW) {
      const data = await stream.readExact(tile.w * tile.h * bpp);
      mirror.setPixels(tile, valuesFromWire(fmt, data, tile.w * tile.h));
      continue;
    }
    if (mask & HEXTILE_BACKGROUND) {
      background = pixelAt(fmt, await stream.readExact(bpp), 0);
    }
    if (background === null) {
      throw new Error("hextile tile used a carried background before any was specified");
    }
    mirror.fillRect(tile, background);
    if (mask & HEXTILE_FOREGROUND) {
      if (mask & HEXTILE_COLOURED) {
        throw new Error("hextile tile sets both foreground-specified and subrects-coloured");
      }
      foreground = pixelAt(fmt, await stream.readExact(bpp), 0);
    }
    if (mask & HEXTILE_SUBRECTS) {
      const count = await stream.readU8();
      const coloured = (mask & HEXTILE_COLOURED) !== 0;
      for (let i = 0; i < count; i++) {
        let color: number;
        if (coloured) {
          color = pixelAt(fmt, await stream.readExact(bpp), 0);
        } else {
          if (foreground === null) {
            throw new Error("hextile tile used a carried foreground before any was specified");
          }
          color = foreground;
        }
        const xy = await stream.readU8();
        const wh = await stream.readU8();
        const x = xy >> 4;
        const y = xy & 0xf;
        const w = (wh >> 4) + 1;
        const h = (wh & 0xf) + 1;
        if (x + w > tile.w || y + h > tile.h) {
          throw new Error(`hextile subrect (${x},${y},${w},${h}) escapes ${tile.w}x${tile.h} tile`);
        }
        mirror.fillRect({ x: tile.x + x, y: tile.y + y, w, h }, color);
      }
    }
  }
}

export async function decodeZlib(
  stream: ByteStream,
  rect: Rect,
  mirror: FramebufferMirror,
  inflater: Inflater,
): Promise<void> {
  const length = await stream.readU32();
  const body = await stream.readExact(length);
  const raw = await inflater.inflate(body, rect.w * rect.h * bytesPerPixel(mirror.format));
  applyRawBytes(mirror, rect, raw);
}

/** Dispatch one rect body by encoding id, consuming exactly its payload. */
export async function decodeRect(
  stream: ByteStream,
  rect: Rect,
  encodingId: number,
  mirror: FramebufferMirror,
  inflater: Inflater,
): Promise<void> {
  switch (encodingId) {
    case ENC_RAW:
      return decodeRaw(stream, rect, mirror);
    case ENC_COPYRECT:
      return decodeCopyRect(stream, rect, mirror);
    case ENC_RRE:
      return decodeRre(stream, rect, mirror);
    case ENC_HEXTILE:
      return decodeHextile(stream, rect, mirror);
    case ENC_ZLIB:
      return decodeZlib(stream, rect, mirror, inflater);
    default:
      throw new Error(`unknown encoding id ${encodingId}`);
  }
}
