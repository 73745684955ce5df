import { ByteStream } from "./bytes.js";
import { ENC_COPYRECT, ENC_RAW, ENC_ZLIB, ENC_HEXTILE } from "./decoders.js";
import { FramebufferMirror, Rect } from "./framebuffer.js";
import { Inflater, StreamInflater } from "./inflate.js";
import {
  clientHandshake,
  keyEventMessage,
  pointerEventMessage,
  readServerMessage,
  ServerInit,
  setEncodingsMessage,
  updateRequestMessage,
  UpdateRect,
} from "./protocol.js";

/** Transport the session runs over; one WebSocket in the browser. */
export interface Transport {
  send(data: Uint8Array): void;
  close(): void;
  onData(cb: (chunk: Uint8Array) => void): void;
  onClose(cb: (reason: string) => void): void;
}

export type SessionState = "connecting" | "live" | "closed" | "error";

export interface SessionStats {
  updates: number;
  updatesPerSecond: number;
  wireBytes: number;
  rawBytes: number;
  ratio: number;
}

export interface SessionOptions {
  /** Encoding preference order sent to the server. */
  encodings?: number[];
  shared?: boolean;
  inflater?: Inflater;
  /** Stop the update loop at the first empty update (tests); the browser
   * viewer keeps polling instead. */
  stopAtEnd?: boolean;
  /** Delay before re-requesting after an empty update, ms. */
  endPollMs?: number;
  onPaint?: (rects: UpdateRect[]) => void;
  onState?: (state: SessionState, detail?: string) => void;
  onStats?: (stats: SessionStats) => void;
}

export const DEFAULT_ENCODINGS = [ENC_ZLIB, ENC_HEXTILE, ENC_COPYRECT, ENC_RAW];

export class ViewerSession {
  state: SessionState = "connecting";
  mirror: FramebufferMirror | null = null;
  serverInit: ServerInit | null = null;
  readonly stats: SessionStats = { updates: 0, updatesPerSecond: 0, wireBytes: 0, rawBytes: 0, ratio: 0 };

  private stream = new ByteStream();
  private inflater: Inflater;
  private encodings: number[];
  private updateTimes: number[] = [];
  private endSeen: (() => void) | null = null;
  private endPromise: Promise<void>;
  private loopPromise: Promise<void> | null = null;

  constructor(
    private transport: Transport,
    private opts: SessionOptions = {},
  ) {
    this.encodings = opts.encodings ?? DEFAULT_ENCODINGS;
    this.inflater = opts.inflater ?? new StreamInflater();
    this.endPromise = new Promise((resolve) => {
      this.endSeen = resolve;
    });
    transport.onData((chunk) => {
      this.stats.wireBytes += chunk.length;
      this.stream.push(chunk);
    });
    transport.onClose((reason) => {
      this.stream.close(reason);
    });
  }

  private setState(state: SessionState, detail?: string): void {
    if (this.state === "closed" || this.state === "error") return;
    this.state = state;
    this.opts.onState?.(state, detail);
  }

  /** Handshake, announce encodings, request the first full frame, and start
   * the update loop. Resolves once the session is live. */
  async connect(): Promise<ServerInit> {
    try {
      const init = await clientHandshake(this.stream, this.transport, this.opts.shared ?? true);
      this.serverInit = init;
      this.mirror = new FramebufferMirror(init.width, init.height, init.format);
      this.transport.send(setEncodingsMessage(this.encodings));
      this.transport.send(updateRequestMessage(false, this.fullRect()));
      this.setState("live");
      this.loopPromise = this.loop();
      return init;
    } catch (err) {
      this.fail(err);
      throw err;
    }
  }

  private fullRect(): Rect {
    return { x: 0, y: 0, w: this.mirror!.width, h: this.mirror!.height };
  }

  private fail(err: unknown): void {
    if (this.state !== "closed") {
      this.state = "error";
      this.opts.onState?.("error", err instanceof Error ? err.message : String(err));
    }
    this.transport.close();
  }

  private recordUpdate(rects: UpdateRect[]): void {
    const now = Date.now();
    this.stats.updates += 1;
    this.updateTimes.push(now);
    while (this.updateTimes.length && this.updateTimes[0] < now - 3000) {
      this.updateTimes.shift();
    }
    const span = this.updateTimes.length > 1 ? (now - this.updateTimes[0]) / 1000 : 1;
    this.stats.updatesPerSecond = this.updateTimes.length / Math.max(span, 0.001);
    const bpp = this.mirror!.format.bitsPerPixel / 8;
    for (const r of rects) {
      this.stats.rawBytes += r.rect.w * r.rect.h * bpp;
    }
    this.stats.ratio = this.stats.wireBytes > 0 ? this.stats.rawBytes / this.stats.wireBytes : 0;
    this.opts.onStats?.(this.stats);
  }

  private async loop(): Promise<void> {
    try {
      while (this.state === "live") {
        const event = await readServerMessage(this.stream, this.mirror!, this.inflater);
        if (event.kind !== "update") {
          continue; // bell / cut text / colour map: parsed and ignored
        }
        if (event.rects.length === 0) {
          this.endSeen?.();
          if (this.opts.stopAtEnd) {
            return;
          }
          await sleep(this.opts.endPollMs ?? 50);
          this.send(updateRequestMessage(true, this.fullRect()));
          continue;
        }
        this.recordUpdate(event.rects);
        this.opts.onPaint?.(event.rects);
        this.send(updateRequestMessage(true, this.fullRect()));
      }
    } catch (err) {
      this.fail(err);
    }
  }

  private send(data: Uint8Array): void {
    if (this.state === "live") {
      this.transport.send(data);
    }
  }

  /** Resolves when the server signals end-of-content for the first time. */
  waitForEnd(): Promise<void> {
    return this.endPromise;
  }

  async settle(): Promise<void> {
    await this.loopPromise;
  }

  // -- input forwarding; the server is authoritative, nothing echoes locally

  forwardPointer(displayX: number, displayY: number, scale: number, buttons = 0): void {
    if (this.state !== "live" || !this.mirror) return;
    const x = clamp(Math.floor(displayX / scale), 0, this.mirror.width - 1);
    const y = clamp(Math.floor(displayY / scale), 0, this.mirror.height - 1);
    this.send(pointerEventMessage(buttons, x, y));
  }

  forwardKey(keysym: number, down: boolean): void {
    if (this.state !== "live") return;
    this.send(keyEventMessage(down, keysym));
  }

  close(): void {
    if (this.state === "live" || this.state === "connecting") {
      this.setState("closed");
    }
    this.transport.close();
  }
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(Math.max(v, lo), hi);
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
