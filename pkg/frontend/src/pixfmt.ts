/** True-colour pixel layout, as carried in the 16-byte wire structure. */
export interface PixelFormat {
  bitsPerPixel: number;
  depth: number;
  bigEndian: boolean;
  trueColor: boolean;
  redMax: number;
  greenMax: number;
  blueMax: number;
  redShift: number;
  greenShift: number;
  blueShift: number;
}

export function bytesPerPixel(fmt: PixelFormat): number {
  return fmt.bitsPerPixel / 8;
}

export function parsePixelFormat(data: Uint8Array): PixelFormat {
  if (data.length !== 16) {
    throw new Error(`pixel format needs 16 bytes, got ${data.length}`);
  }
  const view = new DataView(data.buffer, data.byteOffset, 16);
  const fmt: PixelFormat = {
    bitsPerPixel: view.getUint8(0),
    depth: view.getUint8(1),
    bigEndian: view.getUint8(2) !== 0,
    trueColor: view.getUint8(3) !== 0,
    redMax: view.getUint16(4),
    greenMax: view.getUint16(6),
    blueMax: view.getUint16(8),
    redShift: view.getUint8(10),
    greenShift: view.getUint8(11),
    blueShift: view.getUint8(12),
  };
  if (![8, 16, 32].includes(fmt.bitsPerPixel)) {
    throw new Error(`unsupported bits per pixel ${fmt.bitsPerPixel}`);
  }
  return fmt;
}

/** Read one pixel value from wire bytes at an offset. */
export function pixelAt(fmt: PixelFormat, data: Uint8Array, offset: number): number {
  const bpp = bytesPerPixel(fmt);
  let value = 0;
  if (fmt.bigEndian) {
    for (let i = 0; i < bpp; i++) {
      value = value * 256 + data[offset + i];
    }
  } else {
    for (let i = bpp - 1; i >= 0; i--) {
      value = value * 256 + data[offset + i];
    }
  }
  return value >>> 0;
}

/** Split a pixel value into 8-bit RGB for canvas painting. */
export function pixelToRgb(fmt: PixelFormat, value: number): [number, number, number] {
  const r = (value >>> fmt.redShift) & fmt.redMax;
  const g = (value >>> fmt.greenShift) & fmt.greenMax;
  const b = (value >>> fmt.blueShift) & fmt.blueMax;
  return [
    Math.round((r * 255) / fmt.redMax),
    Math.round((g * 255) / fmt.greenMax),
    Math.round((b * 255) / fmt.blueMax),
  ];
}
