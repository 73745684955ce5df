import { ByteStream, concatBytes, u16, u32 } from "./bytes.js";
import { FramebufferMirror, Rect } from "./framebuffer.js";
import { decodeRect, SUPPORTED_ENCODINGS } from "./decoders.js";
import { Inflater } from "./inflate.js";
import { parsePixelFormat, PixelFormat } from "./pixfmt.js";

export const PROTOCOL_VERSION = "RFB 003.008\n";
const SECURITY_NONE = 1;

export interface ServerInit {
  width: number;
  height: number;
  format: PixelFormat;
  name: string;
}

export interface Sender {
  send(data: Uint8Array): void;
}

/** Client half of the version/security handshake over an open byte stream. */
export async function clientHandshake(stream: ByteStream, out: Sender, shared = true): Promise<ServerInit> {
  const version = new TextDecoder().decode(await stream.readExact(12));
  if (version !== PROTOCOL_VERSION) {
    throw new Error(`unsupported server version ${JSON.stringify(version)}`);
  }
  out.send(new TextEncoder().encode(PROTOCOL_VERSION));
  const count = await stream.readU8();
  if (count === 0) {
    const reason = new TextDecoder().decode(await stream.readExact(await stream.readU32()));
    throw new Error(`server refused connection: ${reason}`);
  }
  const types = await stream.readExact(count);
  if (!types.includes(SECURITY_NONE)) {
    throw new Error(`server offers no supported security type (got ${Array.from(types)})`);
  }
  out.send(Uint8Array.of(SECURITY_NONE));
  const result = await stream.readU32();
  if (result !== 0) {
    const reason = new TextDecoder().decode(await stream.readExact(await stream.readU32()));
    throw new Error(`security handshake failed: ${reason}`);
  }
  out.send(Uint8Array.of(shared ? 1 : 0));
  const width = await stream.readU16();
  const height = await stream.readU16();
  const format = parsePixelFormat(await stream.readExact(16));
  const name = new TextDecoder().decode(await stream.readExact(await stream.readU32()));
  if (width < 1 || height < 1) {
    throw new Error(`server announced empty framebuffer ${width}x${height}`);
  }
  return { width, height, format, name };
}

// client -> server message builders

export function setEncodingsMessage(encodings: number[]): Uint8Array {
  const parts: (Uint8Array | number[])[] = [[2, 0], u16(encodings.length)];
  for (const enc of encodings) {
    parts.push(u32(enc >>> 0));
  }
  return concatBytes(parts);
}

export function updateRequestMessage(incremental: boolean, rect: Rect): Uint8Array {
  return concatBytes([[3, incremental ? 1 : 0], u16(rect.x), u16(rect.y), u16(rect.w), u16(rect.h)]);
}

export function keyEventMessage(down: boolean, keysym: number): Uint8Array {
  return concatBytes([[4, down ? 1 : 0, 0, 0], u32(keysym)]);
}

export function pointerEventMessage(buttons: number, x: number, y: number): Uint8Array {
  return concatBytes([[5, buttons & 0xff], u16(x), u16(y)]);
}

export interface UpdateRect {
  rect: Rect;
  encodingId: number;
}

export type ServerEvent =
  | { kind: "update"; rects: UpdateRect[] }
  | { kind: "bell" }
  | { kind: "cutText"; text: string }
  | { kind: "colourMap" };

/** Parse one server message, decoding update rects straight into the mirror. */
export async function readServerMessage(
  stream: ByteStream,
  mirror: FramebufferMirror,
  inflater: Inflater,
): Promise<ServerEvent> {
  const type = await stream.readU8();
  if (type === 0) {
    await stream.readExact(1);
    const count = await stream.readU16();
    const rects: UpdateRect[] = [];
    for (let i = 0; i < count; i++) {
      const header = await stream.readExact(12);
      const view = new DataView(header.buffer, header.byteOffset, 12);
      const rect: Rect = {
        x: view.getUint16(0),
        y: view.getUint16(2),
        w: view.getUint16(4),
        h: view.getUint16(6),
      };
      const encodingId = view.getInt32(8);
      if (!SUPPORTED_ENCODINGS.includes(encodingId)) {
        throw new Error(`unknown encoding id ${encodingId} in update`);
      }
      await decodeRect(stream, rect, encodingId, mirror, inflater);
      rects.push({ rect, encodingId });
    }
    return { kind: "update", rects };
  }
  if (type === 1) {
    await stream.readExact(1);
    const header = await stream.readExact(4);
    const count = (header[2] << 8) | header[3];
    await stream.readExact(6 * count);
    return { kind: "colourMap" };
  }
  if (type === 2) {
    return { kind: "bell" };
  }
  if (type === 3) {
    await stream.readExact(3);
    const text = new TextDecoder().decode(await stream.readExact(await stream.readU32()));
    return { kind: "cutText", text };
  }
  throw new Error(`unknown server message type ${type}`);
}
