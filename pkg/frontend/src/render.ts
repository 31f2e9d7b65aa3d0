// Top-down canvas rendering: a pure function of the view model, so that
// replaying a recorded state stream reproduces identical frames.

import type { ViewModel } from "./viewmodel.js";

export interface Canvas2D {
  // the subset of CanvasRenderingContext2D the renderer touches
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  textAlign: CanvasTextAlign;
  save(): void;
  restore(): void;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
  translate(x: number, y: number): void;
  rotate(a: number): void;
}

export interface Viewport {
  width: number;
  height: number;
}

interface Transform {
  scale: number; // px per mm, >= MIN_SCALE
  ox: number;
  oy: number;
}

export const MIN_SCALE = 2.0; // 1 px >= 0.5 mm

function bounds(vm: ViewModel): { x0: number; y0: number; x1: number; y1: number } {
  let x0 = -60, y0 = -60, x1 = 60, y1 = 60;
  if (vm.scenario) {
    for (const wall of vm.scenario.walls_mm) {
      for (const [x, y] of wall) {
        x0 = Math.min(x0, x); y0 = Math.min(y0, y);
        x1 = Math.max(x1, x); y1 = Math.max(y1, y);
      }
    }
  }
  return { x0: x0 - 20, y0: y0 - 20, x1: x1 + 20, y1: y1 + 20 };
}

function fitTransform(vm: ViewModel, vp: Viewport): Transform {
  const b = bounds(vm);
  const sx = vp.width / (b.x1 - b.x0);
  const sy = vp.height / (b.y1 - b.y0);
  const scale = Math.max(Math.min(sx, sy), MIN_SCALE);
  // world y up, canvas y down
  return { scale, ox: -b.x0 * scale, oy: b.y1 * scale };
}

function toPx(t: Transform, x_mm: number, y_mm: number): [number, number] {
  return [t.ox + x_mm * t.scale, t.oy - y_mm * t.scale];
}

export function render(vm: ViewModel, ctx: Canvas2D, vp: Viewport): void {
  const t = fitTransform(vm, vp);
  ctx.clearRect(0, 0, vp.width, vp.height);
  ctx.fillStyle = "#10141a";
  ctx.fillRect(0, 0, vp.width, vp.height);

  if (vm.scenario) {
    // goal region
    if (vm.scenario.goal) {
      const [gx, gy] = toPx(t, vm.scenario.goal.x_mm, vm.scenario.goal.y_mm);
      ctx.beginPath();
      ctx.arc(gx, gy, vm.scenario.goal.radius_mm * t.scale, 0, 2 * Math.PI);
      ctx.fillStyle = vm.latest?.goal_reached ? "#2e7d32" : "#1b3a2a";
      ctx.fill();
      ctx.strokeStyle = "#4caf50";
      ctx.lineWidth = 2;
      ctx.stroke();
    }
    // walls
    ctx.strokeStyle = "#8899aa";
    ctx.lineWidth = 3;
    for (const wall of vm.scenario.walls_mm) {
      ctx.beginPath();
      const [x0, y0] = toPx(t, wall[0][0], wall[0][1]);
      const [x1, y1] = toPx(t, wall[1][0], wall[1][1]);
      ctx.moveTo(x0, y0);
      ctx.lineTo(x1, y1);
      ctx.stroke();
    }
  }

  // trail
  if (vm.trail.length > 1) {
    ctx.strokeStyle = "#3f6f9f";
    ctx.lineWidth = 1;
    ctx.beginPath();
    const [sx, sy] = toPx(t, vm.trail[0].x_mm, vm.trail[0].y_mm);
    ctx.moveTo(sx, sy);
    for (const p of vm.trail.slice(1)) {
      const [x, y] = toPx(t, p.x_mm, p.y_mm);
      ctx.lineTo(x, y);
    }
    ctx.stroke();
  }

  // robot footprint with heading marker and active-electrode highlight
  if (vm.latest && vm.scenario) {
    const pose = vm.latest.pose;
    const L = vm.scenario.footprint.length_mm * t.scale;
    const W = vm.scenario.footprint.width_mm * t.scale;
    const [cx, cy] = toPx(t, pose.x_mm, pose.y_mm);
    ctx.save();
    ctx.translate(cx, cy);
    ctx.rotate((-pose.theta_deg * Math.PI) / 180);
    ctx.fillStyle = vm.latest.contact ? "#7a4b2b" : "#2b4b7a";
    ctx.fillRect(-L / 2, -W / 2, L, W);
    ctx.strokeStyle = vm.latest.contact ? "#ff9f43" : "#9fc3ff";
    ctx.lineWidth = 2;
    ctx.strokeRect(-L / 2, -W / 2, L, W);
    // active electrode side highlight
    const sideRects: Record<string, [number, number, number, number]> = {
      "+x": [L / 2 - L / 8, -W / 2, L / 8, W],
      "-x": [-L / 2, -W / 2, L / 8, W],
      "+y": [-L / 2, -W / 2, L, W / 8],
      "-y": [-L / 2, W / 2 - W / 8, L, W / 8],
    };
    ctx.fillStyle = "#ffd54f";
    for (const side of vm.latest.active) {
      const r = sideRects[side];
      if (r) ctx.fillRect(r[0], r[1], r[2], r[3]);
    }
    // heading marker
    ctx.strokeStyle = "#ffffff";
    ctx.beginPath();
    ctx.moveTo(0, 0);
    ctx.lineTo(L / 2, 0);
    ctx.stroke();
    ctx.restore();
  }

  // status overlays
  ctx.font = "14px monospace";
  ctx.textAlign = "left";
  ctx.fillStyle = "#d8e0e8";
  if (vm.latest) {
    ctx.fillText(
      `t=${vm.latest.t_s.toFixed(2)} s  v=${vm.latest.speed_mm_s.toFixed(1)} mm/s  ` +
        `${vm.latest.waveform.amplitude_kv} kV ${vm.latest.waveform.zt_ms}/${vm.latest.waveform.rt_ms} ms`,
      10,
      20,
    );
  }
  if (vm.latest?.goal_reached) {
    ctx.font = "24px monospace";
    ctx.textAlign = "center";
    ctx.fillStyle = "#4caf50";
    ctx.fillText("GOAL REACHED", vp.width / 2, 40);
  }
  if (vm.connection !== "open") {
    ctx.fillStyle = "rgba(0,0,0,0.6)";
    ctx.fillRect(0, 0, vp.width, vp.height);
    ctx.font = "20px monospace";
    ctx.textAlign = "center";
    ctx.fillStyle = "#ff7043";
    ctx.fillText("disconnected", vp.width / 2, vp.height / 2);
  }
}
