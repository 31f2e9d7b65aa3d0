// Client-side view state. The bridge is authoritative: the view model only
// mirrors server frames, it never predicts motion.

import type {
  Direction,
  Mode,
  Pose,
  ScenarioInfo,
  ServerMessage,
  StateFrame,
} from "./protocol.js";

export const TRAIL_CAP = 2000;

export type Connection = "connecting" | "open" | "closed";

export interface ViewModel {
  connection: Connection;
  role: "operator" | "spectator" | null;
  scenario: ScenarioInfo | null;
  latest: StateFrame | null;
  trail: Pose[];
  pressed: Direction | null;
  sliders: { amplitude_kv: number; zt_ms: number; rt_ms: number };
  mode: Mode;
  lastError: string | null;
}

export function initialViewModel(): ViewModel {
  return {
    connection: "connecting",
    role: null,
    scenario: null,
    latest: null,
    trail: [],
    pressed: null,
    sliders: { amplitude_kv: 5, zt_ms: 20, rt_ms: 80 },
    mode: "four-electrode",
    lastError: null,
  };
}

/** Fold one server message into the view model (returns the same object). */
export function applyServerMessage(vm: ViewModel, msg: ServerMessage): ViewModel {
  if (msg.type === "hello") {
    vm.role = msg.role;
    vm.scenario = msg.scenario;
    vm.trail = [];
  } else if (msg.type === "state") {
    vm.latest = msg;
    vm.mode = msg.mode;
    const prev = vm.trail[vm.trail.length - 1];
    if (!prev || prev.x_mm !== msg.pose.x_mm || prev.y_mm !== msg.pose.y_mm) {
      vm.trail.push({ ...msg.pose });
      if (vm.trail.length > TRAIL_CAP) {
        vm.trail.splice(0, vm.trail.length - TRAIL_CAP); // oldest dropped first
      }
    }
  } else if (msg.type === "error") {
    vm.lastError = msg.message;
  }
  return vm;
}

export function setConnection(vm: ViewModel, c: Connection): ViewModel {
  vm.connection = c;
  if (c !== "open") {
    vm.pressed = null;
  }
  return vm;
}
