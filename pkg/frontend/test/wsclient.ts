// Minimal RFC 6455 client over net.Socket for node tests (this node build
// has no global WebSocket). Text frames only, client-to-server masking as
// the spec requires; exposes the same shape net.ts expects (WebSocketLike).

import { createHash, randomBytes } from "node:crypto";
import { Socket, createConnection } from "node:net";

import type { WebSocketLike } from "../src/net.js";

const GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

export class NodeWebSocket implements WebSocketLike {
  onmessage: ((ev: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: ((err: unknown) => void) | null = null;
  onopen: (() => void) | null = null;

  private sock: Socket;
  private buf = Buffer.alloc(0);
  private upgraded = false;
  private closedEmitted = false;

  constructor(url: string) {
    const u = new URL(url);
    const key = randomBytes(16).toString("base64");
    const expectAccept = createHash("sha1").update(key + GUID).digest("base64");
    this.sock = createConnection({ host: u.hostname, port: Number(u.port || 80) }, () => {
      this.sock.write(
        `GET ${u.pathname}${u.search} HTTP/1.1\r\n` +
        `Host: ${u.host}\r\n` +
        "Upgrade: websocket\r\nConnection: Upgrade\r\n" +
        `Sec-WebSocket-Key: ${key}\r\nSec-WebSocket-Version: 13\r\n\r\n`,
      );
    });
    this.sock.on("data", (chunk) => {
      this.buf = Buffer.concat([this.buf, chunk]);
      if (!this.upgraded) {
        const headerEnd = this.buf.indexOf("\r\n\r\n");
        if (headerEnd === -1) return;
        const header = this.buf.subarray(0, headerEnd).toString();
        this.buf = this.buf.subarray(headerEnd + 4);
        if (!header.includes("101") || !header.includes(expectAccept)) {
          this.emitError(new Error(`websocket upgrade refused: ${header.split("\r\n")[0]}`));
          this.sock.destroy();
          return;
        }
        this.upgraded = true;
        this.onopen?.();
      }
      this.drainFrames();
    });
    this.sock.on("error", (err) => this.emitError(err));
    this.sock.on("close", () => this.emitClose());
  }

  private drainFrames(): void {
    while (true) {
      if (this.buf.length < 2) return;
      const opcode = this.buf[0] & 0x0f;
      let len = this.buf[1] & 0x7f;
      let off = 2;
      if (len === 126) {
        if (this.buf.length < 4) return;
        len = this.buf.readUInt16BE(2);
        off = 4;
      } else if (len === 127) {
        if (this.buf.length < 10) return;
        len = Number(this.buf.readBigUInt64BE(2));
        off = 10;
      }
      if (this.buf.length < off + len) return;
      const payload = this.buf.subarray(off, off + len);
      this.buf = this.buf.subarray(off + len);
      if (opcode === 0x8) {
        this.sock.end();
        this.emitClose();
        return;
      }
      if (opcode === 0x9) {
        this.sendRaw(0xa, payload); // ping -> pong
      } else if (opcode === 0x1) {
        this.onmessage?.({ data: payload.toString("utf-8") });
      }
    }
  }

  send(data: string): void {
    this.sendRaw(0x1, Buffer.from(data, "utf-8"));
  }

  private sendRaw(opcode: number, payload: Buffer): void {
    if (this.sock.destroyed) return;
    const mask = randomBytes(4);
    const masked = Buffer.from(payload);
    for (let i = 0; i < masked.length; i++) masked[i] ^= mask[i % 4];
    let header: Buffer;
    if (payload.length < 126) {
      header = Buffer.from([0x80 | opcode, 0x80 | payload.length]);
    } else if (payload.length < 65536) {
      header = Buffer.alloc(4);
      header[0] = 0x80 | opcode;
      header[1] = 0x80 | 126;
      header.writeUInt16BE(payload.length, 2);
    } else {
      header = Buffer.alloc(10);
      header[0] = 0x80 | opcode;
      header[1] = 0x80 | 127;
      header.writeBigUInt64BE(BigInt(payload.length), 2);
    }
    this.sock.write(Buffer.concat([header, mask, masked]));
  }

  close(): void {
    this.sendRaw(0x8, Buffer.alloc(0));
    this.sock.end();
  }

  private emitError(err: unknown): void {
    this.onerror?.(err);
  }

  private emitClose(): void {
    if (!this.closedEmitted) {
      this.closedEmitted = true;
      this.onclose?.();
    }
  }
}
