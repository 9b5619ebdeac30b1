/**
 * Wire protocol of the steering service, spoken verbatim.
 *
 * Messages are JSON objects {type, session, seq, payload} framed on the TCP
 * side as an ASCII decimal byte length, a newline, then the JSON bytes.
 * The browser side carries one JSON message per WebSocket frame; the bridge
 * translates between the two framings without touching the payload.
 */

export type PortRoleJson =
  | { role: "supply"; direction: "forward" | "reverse" }
  | { role: "vent"; opening: number }
  | { role: "blocked" };

export interface LimbState {
  kappa: number;
  delta_p: number;
  flow: number;
}

export interface Snapshot {
  t: number;
  tick: number;
  applied_seq: number;
  limbs: Record<string, LimbState>;
  power: Record<string, number | boolean>;
  ports: Record<string, PortRoleJson>;
}

export interface Message {
  type: "create" | "join" | "controls" | "ack" | "snapshot" | "error";
  session?: string | null;
  seq?: number;
  payload?: any;
}

export function encodeFrame(msg: Message): Uint8Array {
  const body = new TextEncoder().encode(JSON.stringify(msg));
  const head = new TextEncoder().encode(`${body.byteLength}\n`);
  const out = new Uint8Array(head.byteLength + body.byteLength);
  out.set(head, 0);
  out.set(body, head.byteLength);
  return out;
}

/** Incremental decoder for the length-delimited stream. */
export class FrameDecoder {
  private buffer = new Uint8Array(0);

  push(chunk: Uint8Array): Message[] {
    const joined = new Uint8Array(this.buffer.byteLength + chunk.byteLength);
    joined.set(this.buffer, 0);
    joined.set(chunk, this.buffer.byteLength);
    this.buffer = joined;

    const messages: Message[] = [];
    for (;;) {
      const nl = this.buffer.indexOf(0x0a);
      if (nl < 0) break;
      const header = new TextDecoder().decode(this.buffer.subarray(0, nl));
      const length = Number.parseInt(header, 10);
      if (!Number.isFinite(length) || length < 0) {
        throw new Error(`bad frame header: ${JSON.stringify(header)}`);
      }
      if (this.buffer.byteLength < nl + 1 + length) break;
      const body = this.buffer.subarray(nl + 1, nl + 1 + length);
      messages.push(JSON.parse(new TextDecoder().decode(body)));
      this.buffer = this.buffer.slice(nl + 1 + length);
    }
    return messages;
  }
}

/** Pair prefix of a flat port name: "front_left" -> "front", "left" -> "". */
export function portGroup(port: string): string {
  const i = port.lastIndexOf("_");
  return i < 0 ? "" : port.slice(0, i);
}
