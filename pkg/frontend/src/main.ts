// Wiring: WebSocket connection, canvas resize, keyboard and on-screen
// controls. All robot state comes from the bridge; the client just renders.

import { inputToMessages, KEY_DIRECTIONS, type InputEventLike } from "./input.js";
import type { Direction, ServerMessage } from "./protocol.js";
import { render } from "./render.js";
import { applyServerMessage, initialViewModel, setConnection } from "./viewmodel.js";

const params = new URLSearchParams(window.location.search);
const wsUrl = params.get("ws") ?? `ws://${window.location.host || "127.0.0.1:8471"}`;

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const vm = initialViewModel();
let socket: WebSocket | null = null;

function draw() {
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
  render(vm, ctx, { width: canvas.width, height: canvas.height });
}

function send(messages: ReturnType<typeof inputToMessages>) {
  if (!socket || socket.readyState !== WebSocket.OPEN) return;
  for (const m of messages) {
    socket.send(JSON.stringify(m));
  }
}

function handle(ev: InputEventLike) {
  send(inputToMessages(vm, ev));
  syncSliderLabels();
}

function connect() {
  setConnection(vm, "connecting");
  socket = new WebSocket(wsUrl);
  socket.onopen = () => {
    setConnection(vm, "open");
  };
  socket.onclose = () => {
    setConnection(vm, "closed");
    setTimeout(connect, 1500);
  };
  socket.onmessage = (e) => {
    const msg = JSON.parse(e.data as string) as ServerMessage;
    applyServerMessage(vm, msg);
  };
}

window.addEventListener("keydown", (e) => {
  if (e.repeat) return;
  if (e.key in KEY_DIRECTIONS || e.key === "r" || e.key === "R") {
    e.preventDefault();
    handle({ kind: "keydown", key: e.key });
  }
});
window.addEventListener("keyup", (e) => {
  if (e.key in KEY_DIRECTIONS) {
    e.preventDefault();
    handle({ kind: "keyup", key: e.key });
  }
});

for (const dir of ["+x", "-x", "+y", "-y"] as Direction[]) {
  const btn = document.querySelector<HTMLButtonElement>(`button[data-dir="${dir}"]`);
  if (!btn) continue;
  btn.addEventListener("pointerdown", () => handle({ kind: "pad-press", direction: dir }));
  btn.addEventListener("pointerup", () => handle({ kind: "pad-release" }));
  btn.addEventListener("pointerleave", () => handle({ kind: "pad-release" }));
}

const sliders = {
  amplitude_kv: document.getElementById("amp") as HTMLInputElement,
  zt_ms: document.getElementById("zt") as HTMLInputElement,
  rt_ms: document.getElementById("rt") as HTMLInputElement,
};

function syncSliderLabels() {
  const label = document.getElementById("wf-label");
  if (label) {
    label.textContent =
      `${sliders.amplitude_kv.value} kV, ZT ${sliders.zt_ms.value} ms, RT ${sliders.rt_ms.value} ms`;
  }
}

for (const el of Object.values(sliders)) {
  el.addEventListener("change", () => {
    handle({
      kind: "slider-commit",
      sliders: {
        amplitude_kv: Number(sliders.amplitude_kv.value),
        zt_ms: Number(sliders.zt_ms.value),
        rt_ms: Number(sliders.rt_ms.value),
      },
    });
  });
  el.addEventListener("input", syncSliderLabels);
}

document.getElementById("mode")?.addEventListener("click", () => handle({ kind: "mode-toggle" }));
document.getElementById("reset")?.addEventListener("click", () => handle({ kind: "keydown", key: "r" }));

function loop() {
  draw();
  requestAnimationFrame(loop);
}

connect();
syncSliderLabels();
loop();
