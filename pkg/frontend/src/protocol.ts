// Wire and file types mirroring the session service JSON, plus the little
// kinematics math the client needs to synthesize frames for keyboard play.
// Field names are bit-exact with the server; all game logic stays server-side.

export type Hand = "left" | "right";

export interface HandPose {
  palm_position: [number, number, number];
  hand_direction: [number, number, number];
  palm_normal: [number, number, number];
  confidence: number;
}

export interface HandFrame {
  timestamp: number; // ms since session start
  left: HandPose | null;
  right: HandPose | null;
}

export interface HandAngles {
  flexion_extension: number;
  deviation: number;
}

export type GameKind = "Rhythm" | "Flappy" | "Skiing" | "Plane";

export interface RhythmNote { time: number; lane: Hand }
export interface FlappyPipe { time: number; gap_center: number; gap_height: number }
export interface SkiGate { time: number; center: number; width: number }
export interface PlaneRing { time: number; center_yaw: number; center_pitch: number; radius: number }
export type LevelElement = RhythmNote | FlappyPipe | SkiGate | PlaneRing;

export interface Level {
  schema_version: number;
  game_kind: GameKind;
  duration: number;
  elements: LevelElement[];
  gen_seed?: number;
  points_per_element?: number;
  constraints_snapshot?: Record<string, unknown>;
}

export interface Avatar { y: number; vy: number; x: number; yaw: number; pitch: number }

export type DistanceStatus = "Ok" | "TooClose" | "TooFar";

export interface StateSnapshot {
  type: "StateSnapshot";
  session_id: string;
  seq: number;
  tick: number;
  elapsed_ms: number;
  play_ms: number;
  avatar: Avatar;
  score: number;
  status: string;
  status_reason: string | null;
  scalars: { fall_speed: number; impulse_v: number; hit_window_ms: number; extent_scale: number };
  next_element_index: number;
  distance_status: DistanceStatus;
}

export interface GameEvent {
  kind: string;
  timestamp: number;
  element?: number;
  points?: number;
  hand?: Hand;
  gesture?: string;
  distance_status?: DistanceStatus;
  scalars?: Record<string, number>;
  reason?: string;
  final_score?: number;
}

export interface EventMessage {
  type: "Event";
  session_id: string;
  seq: number;
  event: GameEvent;
}

export interface ErrorMessage {
  type: "Error";
  session_id: string;
  seq: number;
  code: string;
  message: string;
}

export type ServerMessage = StateSnapshot | EventMessage | ErrorMessage;

export type ClientMessage =
  | { type: "InputFrame"; session_id: string; seq: number; frame: HandFrame }
  | { type: "StopSession"; session_id: string; seq: number };

export interface SessionHandle {
  session_id: string;
  state: string;
  patient_id: string;
  game_kind: GameKind;
  mode: string;
  level_id: string;
  profile_id: string;
}

export interface SessionMeta {
  session_id: string;
  patient_id: string;
  game_kind: GameKind;
  mode: string;
  started_at: string;
  final_score: number | null;
  status: string;
  status_reason: string | null;
}

export interface ReplayState {
  tick: number;
  elapsed_ms: number;
  play_ms: number;
  avatar: Avatar;
  score: number;
  status: string;
  next_element_index: number;
  distance_status: DistanceStatus;
}

export interface ReplayData {
  header: { game_kind: GameKind; mode: string; level: Level; patient_id: string; [k: string]: unknown };
  footer: { final_score: number; status: string; status_reason: string | null; entry_count: number; digest: string };
  states: ReplayState[];
  events: { tick: number; event: GameEvent }[];
  verified: boolean;
}

export function parseServerMessage(text: string): ServerMessage {
  const obj = JSON.parse(text);
  if (obj.type !== "StateSnapshot" && obj.type !== "Event" && obj.type !== "Error") {
    throw new Error(`unknown server message type ${obj.type}`);
  }
  return obj as ServerMessage;
}

// Direction vector whose server-side wrist angles equal the given degrees;
// the exact inverse of the engine's asin/atan2 derivation.
export function directionFromAngles(flexionExtension: number, deviation: number): [number, number, number] {
  const fe = (flexionExtension * Math.PI) / 180;
  const dev = (deviation * Math.PI) / 180;
  const h = Math.cos(fe);
  return [h * Math.sin(dev), Math.sin(fe), -h * Math.cos(dev)];
}

export function poseFromAngles(
  flexionExtension: number,
  deviation: number,
  palmPosition: [number, number, number] = [0, 20, 0],
): HandPose {
  return {
    palm_position: palmPosition,
    hand_direction: directionFromAngles(flexionExtension, deviation),
    palm_normal: [0, -1, 0],
    confidence: 1.0,
  };
}

// Forward map, used only to sanity-check the inverse in tests.
export function anglesFromDirection(d: [number, number, number]): HandAngles {
  const [dx, dy, dz] = d;
  return {
    flexion_extension: (Math.asin(Math.max(-1, Math.min(1, dy))) * 180) / Math.PI,
    deviation: (Math.atan2(dx, -dz) * 180) / Math.PI,
  };
}
