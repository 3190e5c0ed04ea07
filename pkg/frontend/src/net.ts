// REST + WebSocket access to the session service. The WebSocket constructor
// is injectable so node tests can supply their own transport.

import {
  ClientMessage,
  HandFrame,
  Level,
  ReplayData,
  ServerMessage,
  SessionHandle,
  SessionMeta,
  parseServerMessage,
} from "./protocol.js";

export interface WebSocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: ((err: unknown) => void) | null;
  onopen: (() => void) | null;
}

export type WebSocketFactory = (url: string) => WebSocketLike;

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!resp.ok) {
      const detail = await resp.text();
      throw new Error(`${method} ${path} -> ${resp.status}: ${detail}`);
    }
    return (await resp.json()) as T;
  }

  listProfiles(): Promise<{ profiles: string[] }> {
    return this.request("GET", "/profiles");
  }

  getProfile(id: string): Promise<Record<string, unknown>> {
    return this.request("GET", `/profiles/${id}`);
  }

  putProfile(id: string, profile: Record<string, unknown>): Promise<{ ok: boolean }> {
    return this.request("PUT", `/profiles/${id}`, profile);
  }

  listLevels(): Promise<{ levels: string[] }> {
    return this.request("GET", "/levels");
  }

  getLevel(id: string): Promise<Level> {
    return this.request("GET", `/levels/${id}`);
  }

  putLevel(id: string, level: Level): Promise<{ ok: boolean }> {
    return this.request("PUT", `/levels/${id}`, level);
  }

  listSessions(patientId?: string): Promise<{ sessions: SessionMeta[] }> {
    const q = patientId ? `?patient_id=${encodeURIComponent(patientId)}` : "";
    return this.request("GET", `/sessions${q}`);
  }

  startSession(body: Record<string, unknown>): Promise<SessionHandle> {
    return this.request("POST", "/sessions/start", body);
  }

  replay(sessionId: string, every = 10): Promise<ReplayData> {
    return this.request("GET", `/sessions/${sessionId}/replay?every=${every}`);
  }

  async exportCsv(sessionId: string, channel: string): Promise<string> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/export?channel=${channel}`);
    if (!resp.ok) throw new Error(`export failed: ${resp.status}`);
    return await resp.text();
  }

  streamUrl(sessionId: string): string {
    return this.baseUrl.replace(/^http/, "ws") + `/sessions/${sessionId}/stream`;
  }
}

export interface SessionStreamHandlers {
  onMessage: (msg: ServerMessage) => void;
  onClose?: () => void;
  onError?: (err: unknown) => void;
}

export class SessionStream {
  private seq = 0;
  private ws: WebSocketLike;
  closed = false;

  constructor(
    readonly sessionId: string,
    url: string,
    handlers: SessionStreamHandlers,
    factory: WebSocketFactory = (u) => new WebSocket(u) as unknown as WebSocketLike,
  ) {
    this.ws = factory(url);
    this.ws.onmessage = (ev) => handlers.onMessage(parseServerMessage(ev.data));
    this.ws.onclose = () => {
      this.closed = true;
      handlers.onClose?.();
    };
    this.ws.onerror = (err) => handlers.onError?.(err);
  }

  set onopen(cb: () => void) {
    this.ws.onopen = cb;
  }

  sendFrame(frame: HandFrame): void {
    this.send({ type: "InputFrame", session_id: this.sessionId, seq: ++this.seq, frame });
  }

  stop(): void {
    this.send({ type: "StopSession", session_id: this.sessionId, seq: ++this.seq });
  }

  private send(msg: ClientMessage): void {
    if (!this.closed) this.ws.send(JSON.stringify(msg));
  }

  close(): void {
    this.closed = true;
    this.ws.close();
  }
}
