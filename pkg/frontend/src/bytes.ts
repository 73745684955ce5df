/**
 * Push-based byte stream with promise-returning exact reads.
 *
 * WebSocket message boundaries are irrelevant to the protocol above, so
 * incoming chunks are concatenated into one logical stream.
 */
export class ByteStream {
  private chunks: Uint8Array[] = [];
  private size = 0;
  private waiter: { need: number; resolve: (data: Uint8Array) => void; reject: (e: Error) => void } | null =
    null;
  private closed: Error | null = null;

  push(chunk: Uint8Array): void {
    if (chunk.length === 0) return;
    this.chunks.push(chunk);
    this.size += chunk.length;
    this.service();
  }

  close(reason = "stream closed"): void {
    this.closed = new Error(reason);
    this.service();
  }

  private take(n: number): Uint8Array {
    const out = new Uint8Array(n);
    let filled = 0;
    while (filled < n) {
      const head = this.chunks[0];
      const want = n - filled;
      if (head.length <= want) {
        out.set(head, filled);
        filled += head.length;
        this.chunks.shift();
      } else {
        out.set(head.subarray(0, want), filled);
        this.chunks[0] = head.subarray(want);
        filled += want;
      }
    }
    this.size -= n;
    return out;
  }

  private service(): void {
    if (!this.waiter) return;
    if (this.size >= this.waiter.need) {
      const { need, resolve } = this.waiter;
      this.waiter = null;
      resolve(this.take(need));
    } else if (this.closed) {
      const { reject } = this.waiter;
      this.waiter = null;
      reject(this.closed);
    }
  }

  readExact(n: number): Promise<Uint8Array> {
    if (this.waiter) {
      return Promise.reject(new Error("concurrent readExact calls are not supported"));
    }
    if (this.size >= n) {
      return Promise.resolve(this.take(n));
    }
    if (this.closed) {
      return Promise.reject(this.closed);
    }
    return new Promise((resolve, reject) => {
      this.waiter = { need: n, resolve, reject };
    });
  }

  async readU8(): Promise<number> {
    return (await this.readExact(1))[0];
  }

  async readU16(): Promise<number> {
    const b = await this.readExact(2);
    return (b[0] << 8) | b[1];
  }

  async readU32(): Promise<number> {
    const b = await this.readExact(4);
    return ((b[0] << 24) | (b[1] << 16) | (b[2] << 8) | b[3]) >>> 0;
  }

  async readS32(): Promise<number> {
    return (await this.readU32()) | 0;
  }
}

export function u16(value: number): [number, number] {
  return [(value >>> 8) & 0xff, value & 0xff];
}

export function u32(value: number): [number, number, number, number] {
  return [(value >>> 24) & 0xff, (value >>> 16) & 0xff, (value >>> 8) & 0xff, value & 0xff];
}

export function concatBytes(parts: (Uint8Array | number[])[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let offset = 0;
  for (const part of parts) {
    out.set(part, offset);
    offset += part.length;
  }
  return out;
}
