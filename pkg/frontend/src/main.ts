import { keysymForKey } from "./keys.js";
import { SessionStats, Transport, ViewerSession } from "./session.js";
import { UpdateRect } from "./protocol.js";

function webSocketTransport(url: string): Promise<Transport> {
  return new Promise((resolve, reject) => {
    const socket = new WebSocket(url);
    socket.binaryType = "arraybuffer";
    const dataCbs: ((chunk: Uint8Array) => void)[] = [];
    const closeCbs: ((reason: string) => void)[] = [];
    socket.addEventListener("message", (ev) => {
      const chunk = new Uint8Array(ev.data as ArrayBuffer);
      for (const cb of dataCbs) cb(chunk);
    });
    socket.addEventListener("close", (ev) => {
      for (const cb of closeCbs) cb(ev.reason || "websocket closed");
    });
    socket.addEventListener("error", () => {
      reject(new Error(`cannot reach bridge at ${url}`));
      for (const cb of closeCbs) cb("websocket error");
    });
    socket.addEventListener("open", () => {
      resolve({
        send: (data) => socket.send(data),
        close: () => socket.close(),
        onData: (cb) => dataCbs.push(cb),
        onClose: (cb) => closeCbs.push(cb),
      });
    });
  });
}

function statusLine(text: string, isError = false): void {
  const el = document.getElementById("status")!;
  el.textContent = text;
  el.className = isError ? "error" : "";
}

function renderStats(el: HTMLElement, stats: SessionStats): void {
  const kb = (stats.wireBytes / 1024).toFixed(1);
  el.textContent =
    `${stats.updatesPerSecond.toFixed(1)} upd/s | ${kb} KiB received | ` +
    `ratio ${stats.ratio.toFixed(2)}`;
}

async function start(): Promise<void> {
  const params = new URLSearchParams(location.search);
  const input = document.getElementById("bridge") as HTMLInputElement;
  input.value = params.get("bridge") ?? `ws://${location.hostname || "127.0.0.1"}:5810/`;

  const canvas = document.getElementById("screen") as HTMLCanvasElement;
  const overlay = document.getElementById("overlay")!;
  let session: ViewerSession | null = null;
  let scale = 1;

  async function connect(): Promise<void> {
    session?.close();
    statusLine("connecting...");
    let transport: Transport;
    try {
      transport = await webSocketTransport(input.value);
    } catch (err) {
      statusLine(err instanceof Error ? err.message : String(err), true);
      return;
    }
    session = new ViewerSession(transport, {
      onState: (state, detail) => {
        statusLine(detail ? `${state}: ${detail}` : state, state === "error");
      },
      onStats: (stats) => renderStats(overlay, stats),
      onPaint: (rects) => paint(rects),
    });
    try {
      const init = await session.connect();
      canvas.width = init.width;
      canvas.height = init.height;
      // integer-scale letterboxing keeps pixels exact
      scale = Math.max(
        1,
        Math.floor(Math.min((window.innerWidth - 32) / init.width, (window.innerHeight - 96) / init.height)),
      );
      canvas.style.width = `${init.width * scale}px`;
      canvas.style.height = `${init.height * scale}px`;
      statusLine(`live: ${init.name} (${init.width}x${init.height}, ${scale}x scale)`);
    } catch {
      // onState already showed the reason
    }
  }

  function paint(rects: UpdateRect[]): void {
    if (!session?.mirror) return;
    const ctx = canvas.getContext("2d")!;
    for (const { rect } of rects) {
      const rgba = session.mirror.toRgba(rect);
      ctx.putImageData(new ImageData(rgba, rect.w, rect.h), rect.x, rect.y);
    }
  }

  canvas.addEventListener("mousemove", (ev) => {
    const bounds = canvas.getBoundingClientRect();
    session?.forwardPointer(ev.clientX - bounds.left, ev.clientY - bounds.top, scale, ev.buttons);
  });
  canvas.addEventListener("mousedown", (ev) => {
    const bounds = canvas.getBoundingClientRect();
    session?.forwardPointer(ev.clientX - bounds.left, ev.clientY - bounds.top, scale, ev.buttons);
    ev.preventDefault();
  });
  canvas.addEventListener("mouseup", (ev) => {
    const bounds = canvas.getBoundingClientRect();
    session?.forwardPointer(ev.clientX - bounds.left, ev.clientY - bounds.top, scale, 0);
  });
  window.addEventListener("keydown", (ev) => {
    const keysym = keysymForKey(ev.key);
    if (keysym !== null && session?.state === "live") {
      session.forwardKey(keysym, true);
      ev.preventDefault();
    }
  });
  window.addEventListener("keyup", (ev) => {
    const keysym = keysymForKey(ev.key);
    if (keysym !== null && session?.state === "live") {
      session.forwardKey(keysym, false);
      ev.preventDefault();
    }
  });
  document.getElementById("connect")!.addEventListener("click", connect);
  if (params.get("bridge")) {
    await connect();
  }
}

start();
