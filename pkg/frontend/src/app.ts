// Application shell: patient play view and therapist replay view, wired to
// the session service. Game logic is entirely server-side; this file is DOM
// glue, the render loop, and the keyboard-fallback frame pump.

import { parseTimeseriesCsv, drawChart, SeriesPoint } from "./chart.js";
import { KeyboardFallback } from "./input.js";
import { ApiClient, SessionStream } from "./net.js";
import { GameEvent, Level, ReplayData, ServerMessage, StateSnapshot } from "./protocol.js";
import { ReplayTimeline } from "./replay.js";
import { renderScene } from "./render.js";
import { buildScene } from "./scene.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

const api = new ApiClient(new URLSearchParams(location.search).get("api") ?? "http://127.0.0.1:8472");

const FRAME_MS = 10; // synthetic frame cadence, matches the engine timestep

class PlayView {
  private stream: SessionStream | null = null;
  private level: Level | null = null;
  private kind: StateSnapshot["status"] | string = "Flappy";
  private mode = "Continuous";
  private prevSnapshot: StateSnapshot | null = null;
  private lastSnapshot: StateSnapshot | null = null;
  private snapshotAtMs = 0;
  private recentEvents: { event: GameEvent; receivedMs: number }[] = [];
  private keyboard = new KeyboardFallback({ hands: ["right"] });
  private frameTimer: number | null = null;
  private sentMs = 0;
  private readonly canvas = $("game-canvas") as HTMLCanvasElement;
  private readonly ctx = this.canvas.getContext("2d")!;

  constructor() {
    this.keyboard.attach(window);
    $("btn-start").addEventListener("click", () => void this.start());
    $("btn-stop").addEventListener("click", () => this.stream?.stop());
    requestAnimationFrame((t) => this.draw(t));
  }

  private async start(): Promise<void> {
    this.stream?.close();
    const profileId = ($<HTMLInputElement>("profile-id")).value || "demo";
    const levelId = ($<HTMLInputElement>("level-id")).value || "demo";
    this.mode = ($<HTMLSelectElement>("mode-select")).value;
    const levelDoc = await api.getLevel(levelId);
    this.level = levelDoc;
    this.kind = levelDoc.game_kind;
    const twoHands = this.kind === "Plane" && this.mode === "TwoHands";
    this.keyboard = new KeyboardFallback({ hands: twoHands ? ["left", "right"] : ["right"] });
    this.keyboard.attach(window);
    const handle = await api.startSession({
      profile_id: profileId,
      level_id: levelId,
      mode: this.mode,
      snapshot_every: 2,
    });
    $("status-line").textContent = `session ${handle.session_id}`;
    this.prevSnapshot = this.lastSnapshot = null;
    this.recentEvents = [];
    this.sentMs = 0;
    this.stream = new SessionStream(handle.session_id, api.streamUrl(handle.session_id), {
      onMessage: (msg) => this.onMessage(msg),
      onClose: () => this.stopPump(),
    });
    this.stream.onopen = () => this.startPump();
  }

  private startPump(): void {
    this.stopPump();
    this.frameTimer = window.setInterval(() => {
      if (!this.stream || this.stream.closed) return;
      this.keyboard.update(FRAME_MS);
      this.stream.sendFrame(this.keyboard.frame(this.sentMs));
      this.sentMs += FRAME_MS;
    }, FRAME_MS);
  }

  private stopPump(): void {
    if (this.frameTimer !== null) {
      clearInterval(this.frameTimer);
      this.frameTimer = null;
    }
  }

  private onMessage(msg: ServerMessage): void {
    if (msg.type === "StateSnapshot") {
      this.prevSnapshot = this.lastSnapshot;
      this.lastSnapshot = msg;
      this.snapshotAtMs = performance.now();
    } else if (msg.type === "Event") {
      this.recentEvents.push({ event: msg.event, receivedMs: performance.now() });
      if (this.recentEvents.length > 64) this.recentEvents.shift();
    } else {
      $("status-line").textContent = `error ${msg.code}: ${msg.message}`;
    }
  }

  private draw(nowMs: number): void {
    if (this.lastSnapshot && this.level) {
      // render between snapshots by interpolation only; logic stays server-side
      const interval = 2 * FRAME_MS;
      const alpha = Math.min(1, (nowMs - this.snapshotAtMs) / interval);
      const scene = buildScene(
        this.level.game_kind,
        this.mode,
        this.level,
        this.prevSnapshot,
        this.lastSnapshot,
        alpha,
        this.recentEvents,
        nowMs,
      );
      renderScene(this.ctx, scene);
    }
    requestAnimationFrame((t) => this.draw(t));
  }
}

class ReplayView {
  private timeline: ReplayTimeline | null = null;
  private replayData: ReplayData | null = null;
  private series: SeriesPoint[] = [];
  private readonly sceneCanvas = $("replay-canvas") as HTMLCanvasElement;
  private readonly chartCanvas = $("chart-canvas") as HTMLCanvasElement;
  private readonly slider = $<HTMLInputElement>("scrub");
  private playing = false;

  constructor() {
    $("btn-load-sessions").addEventListener("click", () => void this.refresh());
    $("btn-play-pause").addEventListener("click", () => { this.playing = !this.playing; });
    this.slider.addEventListener("input", () => this.drawAt(Number(this.slider.value) / 1000));
    $<HTMLSelectElement>("channel-select").addEventListener("change", () => void this.loadChart());
    window.setInterval(() => {
      if (this.playing && this.timeline) {
        const next = Math.min(1000, Number(this.slider.value) + 4);
        this.slider.value = String(next);
        if (next >= 1000) this.playing = false;
        this.drawAt(next / 1000);
      }
    }, 40);
  }

  private async refresh(): Promise<void> {
    const { sessions } = await api.listSessions();
    const list = $("session-list");
    list.innerHTML = "";
    for (const meta of sessions) {
      const row = document.createElement("button");
      row.className = "session-row";
      row.textContent = `${meta.session_id} ${meta.game_kind}/${meta.mode} score=${meta.final_score} ${meta.status}`;
      row.addEventListener("click", () => void this.open(meta.session_id));
      list.appendChild(row);
    }
  }

  private async open(sessionId: string): Promise<void> {
    try {
      this.replayData = await api.replay(sessionId, 5);
    } catch (err) {
      $("replay-status").textContent = `integrity check failed: ${err}`;
      this.timeline = null;
      return;
    }
    this.timeline = new ReplayTimeline(this.replayData);
    $("replay-status").textContent =
      `verified: ${this.replayData.states.length} states, final score ${this.replayData.footer.final_score}`;
    ($<HTMLInputElement>("export-session")).value = sessionId;
    await this.loadChart();
    this.slider.value = "0";
    this.drawAt(0);
  }

  private async loadChart(): Promise<void> {
    const sessionId = ($<HTMLInputElement>("export-session")).value;
    if (!sessionId) return;
    const channel = ($<HTMLSelectElement>("channel-select")).value;
    const csv = await api.exportCsv(sessionId, channel);
    this.series = parseTimeseriesCsv(csv);
    this.drawAt(Number(this.slider.value) / 1000);
  }

  private drawAt(fraction: number): void {
    if (!this.timeline || !this.replayData) return;
    const state = this.timeline.stateAtFraction(fraction);
    if (!state) return;
    const level = this.replayData.header.level;
    const snapshotLike: StateSnapshot = {
      type: "StateSnapshot",
      session_id: "",
      seq: 0,
      tick: state.tick,
      elapsed_ms: state.elapsed_ms,
      play_ms: state.play_ms,
      avatar: state.avatar,
      score: state.score,
      status: state.status,
      status_reason: null,
      scalars: { fall_speed: 0, impulse_v: 0, hit_window_ms: 0, extent_scale: 1 },
      next_element_index: state.next_element_index,
      distance_status: state.distance_status,
    };
    const scene = buildScene(
      level.game_kind,
      this.replayData.header.mode as string,
      level,
      null,
      snapshotLike,
      1,
      [],
      0,
    );
    renderScene(this.sceneCanvas.getContext("2d")!, scene);
    drawChart(this.chartCanvas.getContext("2d")!, this.series, this.timeline.markers(), fraction);
    $("scrub-info").textContent = `tick ${state.tick} | play ${(state.play_ms / 1000).toFixed(2)} s | score ${state.score}`;
  }
}

function switchView(view: "play" | "replay"): void {
  $("view-play").style.display = view === "play" ? "block" : "none";
  $("view-replay").style.display = view === "replay" ? "block" : "none";
}

new PlayView();
new ReplayView();
$("nav-play").addEventListener("click", () => switchView("play"));
$("nav-replay").addEventListener("click", () => switchView("replay"));
switchView("play");
