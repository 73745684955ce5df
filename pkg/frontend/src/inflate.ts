/**
 * Streaming zlib (RFC 1950) inflater. One instance per session: the remote
 * compressor never resets, so all payloads must flow through the same state.
 */
export interface Inflater {
  /** Feed one compressed payload; resolves with exactly expectedLen bytes. */
  inflate(chunk: Uint8Array, expectedLen: number): Promise<Uint8Array>;
}

/**
 * Browser implementation over DecompressionStream("deflate"). The expected
 * output length is known from rect geometry, which sidesteps flush-boundary
 * detection entirely: read until that many bytes arrived.
 */
export class StreamInflater implements Inflater {
  private writer: WritableStreamDefaultWriter<Uint8Array>;
  private reader: ReadableStreamDefaultReader<Uint8Array>;
  private leftover: Uint8Array | null = null;

  constructor() {
    const ds = new DecompressionStream("deflate");
    this.writer = ds.writable.getWriter();
    this.reader = ds.readable.getReader();
  }

  async inflate(chunk: Uint8Array, expectedLen: number): Promise<Uint8Array> {
    await this.writer.write(chunk);
    const out = new Uint8Array(expectedLen);
    let filled = 0;
    if (this.leftover) {
      const take = Math.min(this.leftover.length, expectedLen);
      out.set(this.leftover.subarray(0, take), 0);
      filled = take;
      this.leftover = take < this.leftover.length ? this.leftover.subarray(take) : null;
    }
    while (filled < expectedLen) {
      const { value, done } = await this.reader.read();
      if (done) {
        throw new Error(`zlib stream ended ${expectedLen - filled} bytes short`);
      }
      const take = Math.min(value.length, expectedLen - filled);
      out.set(value.subarray(0, take), filled);
      filled += take;
      if (take < value.length) {
        this.leftover = value.subarray(take);
      }
    }
    return out;
  }
}
