import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { WebSocket } from "ws";

import { Transport } from "../src/session.js";

export const REPO_ROOT = join(new URL(".", import.meta.url).pathname, "..", "..");

export function tempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

export interface Spawned {
  proc: ChildProcess;
  port: number;
  wsPort?: number;
}

/** Start a python CLI process and wait for its "listening" line(s). */
export function spawnTool(args: string[], listenLines: number): Promise<Spawned> {
  return new Promise((resolve, reject) => {
    const proc = spawn("python3", ["-m", "rfbkit", ...args], {
      cwd: REPO_ROOT,
      stdio: ["ignore", "pipe", "pipe"],
    });
    let out = "";
    let errOut = "";
    const ports: Record<string, number> = {};
    proc.stdout!.on("data", (chunk: Buffer) => {
      out += chunk.toString();
      for (const line of out.split("\n")) {
        const m = line.match(/^listening(?: (\w+))? on [\d.]+:(\d+)/);
        if (m) {
          ports[m[1] ?? "tcp"] = Number(m[2]);
        }
      }
      if (Object.keys(ports).length >= listenLines) {
        resolve({ proc, port: ports.tcp, wsPort: ports.ws });
      }
    });
    proc.stderr!.on("data", (chunk: Buffer) => {
      errOut += chunk.toString();
    });
    proc.on("exit", (code) => {
      reject(new Error(`rfbkit ${args[0]} exited with ${code}: ${errOut}`));
    });
    setTimeout(() => reject(new Error(`rfbkit ${args[0]} never started: ${errOut}`)), 20_000);
  });
}

export function stop(spawned: Spawned | undefined): void {
  spawned?.proc.removeAllListeners("exit");
  spawned?.proc.kill();
}

/** Run `rfbkit client` to completion; returns its JSON summary line. */
export function runHeadlessTwin(args: string[]): Promise<Record<string, unknown>> {
  return new Promise((resolve, reject) => {
    const proc = spawn("python3", ["-m", "rfbkit", "client", ...args], {
      cwd: REPO_ROOT,
      stdio: ["ignore", "pipe", "pipe"],
    });
    let out = "";
    let err = "";
    proc.stdout!.on("data", (c: Buffer) => (out += c.toString()));
    proc.stderr!.on("data", (c: Buffer) => (err += c.toString()));
    proc.on("exit", (code) => {
      if (code === 0) {
        resolve(JSON.parse(out.trim().split("\n").pop()!));
      } else {
        reject(new Error(`twin client exited ${code}: ${err}`));
      }
    });
  });
}

/** ws-package transport matching the browser WebSocket transport shape. */
export function wsTransport(url: string): Promise<Transport> {
  return new Promise((resolve, reject) => {
    const socket = new WebSocket(url);
    socket.binaryType = "arraybuffer";
    const dataCbs: ((chunk: Uint8Array) => void)[] = [];
    const closeCbs: ((reason: string) => void)[] = [];
    socket.on("message", (data: ArrayBuffer) => {
      const chunk = new Uint8Array(data);
      for (const cb of dataCbs) cb(chunk);
    });
    socket.on("close", () => {
      for (const cb of closeCbs) cb("websocket closed");
    });
    socket.on("error", (err) => reject(err));
    socket.on("open", () => {
      resolve({
        send: (data) => socket.send(data),
        close: () => socket.close(),
        onData: (cb) => dataCbs.push(cb),
        onClose: (cb) => closeCbs.push(cb),
      });
    });
  });
}

export function sha256Hex(data: Uint8Array): Promise<string> {
  return import("node:crypto").then((crypto) =>
    crypto.createHash("sha256").update(data).digest("hex"),
  );
}
