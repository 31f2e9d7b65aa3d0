// Maps input events to protocol messages: a command on press, stop on
// release, at most one message per transition. Inputs while disconnected
// are dropped (the caller shows the cue).

import type { ClientMessage, Direction, Mode } from "./protocol.js";
import type { ViewModel } from "./viewmodel.js";

export const KEY_DIRECTIONS: Record<string, Direction> = {
  ArrowRight: "+x",
  ArrowLeft: "-x",
  ArrowUp: "+y",
  ArrowDown: "-y",
};

export interface InputEventLike {
  kind: "keydown" | "keyup" | "pad-press" | "pad-release" | "slider-commit" | "mode-toggle";
  key?: string;
  direction?: Direction;
  sliders?: { amplitude_kv: number; zt_ms: number; rt_ms: number };
}

export function inputToMessages(vm: ViewModel, ev: InputEventLike): ClientMessage[] {
  if (vm.connection !== "open" || vm.role !== "operator") {
    return [];
  }
  switch (ev.kind) {
    case "keydown": {
      if (ev.key === "r" || ev.key === "R") {
        return [{ type: "reset" }];
      }
      const dir = ev.key ? KEY_DIRECTIONS[ev.key] : undefined;
      if (!dir || vm.pressed === dir) {
        return []; // key repeat: no duplicate command
      }
      vm.pressed = dir;
      return [{ type: "command", direction: dir }];
    }
    case "keyup": {
      const dir = ev.key ? KEY_DIRECTIONS[ev.key] : undefined;
      if (!dir || vm.pressed !== dir) {
        return [];
      }
      vm.pressed = null;
      return [{ type: "command", direction: "stop" }];
    }
    case "pad-press": {
      if (!ev.direction || vm.pressed === ev.direction) {
        return [];
      }
      vm.pressed = ev.direction;
      return [{ type: "command", direction: ev.direction }];
    }
    case "pad-release": {
      if (vm.pressed === null) {
        return [];
      }
      vm.pressed = null;
      return [{ type: "command", direction: "stop" }];
    }
    case "slider-commit": {
      if (!ev.sliders) {
        return [];
      }
      vm.sliders = { ...ev.sliders };
      return [{ type: "set_waveform", ...ev.sliders }];
    }
    case "mode-toggle": {
      const next: Mode = vm.mode === "four-electrode" ? "dual" : "four-electrode";
      return [{ type: "mode", value: next }];
    }
  }
  return [];
}
