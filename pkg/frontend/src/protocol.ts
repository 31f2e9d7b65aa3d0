// Wire protocol of the teleoperation bridge: one JSON object per text frame.

export type Direction = "+x" | "-x" | "+y" | "-y" | "stop";
export type Mode = "four-electrode" | "dual";

export interface CommandMessage {
  type: "command";
  direction: Direction;
}

export interface SetWaveformMessage {
  type: "set_waveform";
  amplitude_kv: number;
  zt_ms: number;
  rt_ms: number;
}

export interface ResetMessage {
  type: "reset";
}

export interface ModeMessage {
  type: "mode";
  value: Mode;
}

export interface DriveMessage {
  type: "drive";
  left: boolean;
  right: boolean;
}

export type ClientMessage =
  | CommandMessage
  | SetWaveformMessage
  | ResetMessage
  | ModeMessage
  | DriveMessage;

export interface Pose {
  x_mm: number;
  y_mm: number;
  theta_deg: number;
}

export interface StateFrame {
  type: "state";
  t_s: number;
  pose: Pose;
  mode: Mode;
  command: Direction;
  active: string[];
  contact: boolean;
  goal_reached: boolean;
  waveform: { amplitude_kv: number; zt_ms: number; rt_ms: number };
  speed_mm_s: number;
}

export interface ScenarioInfo {
  name: string;
  walls_mm: [number, number][][];
  footprint: { length_mm: number; width_mm: number };
  start: Pose;
  goal: { x_mm: number; y_mm: number; radius_mm: number } | null;
}

export interface HelloMessage {
  type: "hello";
  role: "operator" | "spectator";
  scenario: ScenarioInfo;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage = HelloMessage | StateFrame | ErrorMessage;
