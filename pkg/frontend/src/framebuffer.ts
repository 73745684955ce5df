import { PixelFormat, bytesPerPixel, pixelToRgb } from "./pixfmt.js";

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

/**
 * Local mirror of the remote framebuffer: one pixel VALUE per cell, in the
 * session's wire format. Values convert to RGBA only at paint time, so the
 * mirror compares bit-exactly against the server's pixels.
 */
export class FramebufferMirror {
  readonly pixels: Uint32Array;

  constructor(
    readonly width: number,
    readonly height: number,
    readonly format: PixelFormat,
  ) {
    this.pixels = new Uint32Array(width * height);
  }

  checkRect(r: Rect): void {
    if (r.x < 0 || r.y < 0 || r.w < 1 || r.h < 1 || r.x + r.w > this.width || r.y + r.h > this.height) {
      throw new Error(`rect ${JSON.stringify(r)} outside ${this.width}x${this.height} framebuffer`);
    }
  }

  fillRect(r: Rect, value: number): void {
    this.checkRect(r);
    for (let y = r.y; y < r.y + r.h; y++) {
      this.pixels.fill(value, y * this.width + r.x, y * this.width + r.x + r.w);
    }
  }

  setPixels(r: Rect, values: Uint32Array): void {
    this.checkRect(r);
    for (let row = 0; row < r.h; row++) {
      const src = values.subarray(row * r.w, (row + 1) * r.w);
      this.pixels.set(src, (r.y + row) * this.width + r.x);
    }
  }

  copyRect(dst: Rect, srcX: number, srcY: number): void {
    this.checkRect(dst);
    this.checkRect({ x: srcX, y: srcY, w: dst.w, h: dst.h });
    // snapshot first: source and destination may overlap
    const snapshot = new Uint32Array(dst.w * dst.h);
    for (let row = 0; row < dst.h; row++) {
      const from = (srcY + row) * this.width + srcX;
      snapshot.set(this.pixels.subarray(from, from + dst.w), row * dst.w);
    }
    this.setPixels(dst, snapshot);
  }

  /** Serialize a rect (or everything) in row-major wire byte order. */
  toBytes(r?: Rect): Uint8Array {
    const rect = r ?? { x: 0, y: 0, w: this.width, h: this.height };
    this.checkRect(rect);
    const bpp = bytesPerPixel(this.format);
    const out = new Uint8Array(rect.w * rect.h * bpp);
    let offset = 0;
    for (let y = rect.y; y < rect.y + rect.h; y++) {
      for (let x = rect.x; x < rect.x + rect.w; x++) {
        const value = this.pixels[y * this.width + x];
        if (this.format.bigEndian) {
          for (let i = bpp - 1; i >= 0; i--) {
            out[offset + i] = (value >>> (8 * (bpp - 1 - i))) & 0xff;
          }
        } else {
          for (let i = 0; i < bpp; i++) {
            out[offset + i] = (value >>> (8 * i)) & 0xff;
          }
        }
        offset += bpp;
      }
    }
    return out;
  }

  /** RGBA bytes for one rect, ready for ImageData. */
  toRgba(r: Rect): Uint8ClampedArray {
    this.checkRect(r);
    const out = new Uint8ClampedArray(r.w * r.h * 4);
    let offset = 0;
    for (let y = r.y; y < r.y + r.h; y++) {
      for (let x = r.x; x < r.x + r.w; x++) {
        const [red, green, blue] = pixelToRgb(this.format, this.pixels[y * this.width + x]);
        out[offset] = red;
        out[offset + 1] = green;
        out[offset + 2] = blue;
        out[offset + 3] = 255;
        offset += 4;
      }
    }
    return out;
  }
}
