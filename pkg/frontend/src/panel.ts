/**
 * Operator panel state machine, DOM-free so it can be unit tested.
 *
 * Widgets: per port a three-way supply selector (forward / off / reverse)
 * and a vent-opening slider used while the supply is off.  Switching a
 * supply on moves it within its port group (one supply per group), and each
 * user interaction emits exactly one control frame carrying a partial port
 * patch with a strictly increasing sequence number.
 *
 * The panel owns no physics: limb arcs are drawn from the streamed
 * curvature only, and reconnecting joins the existing session instead of
 * creating state.
 */

import { Message, PortRoleJson, Snapshot, portGroup } from "./protocol.js";

export type ConnectionStatus = "disconnected" | "connecting" | "connected" | "error";

export interface WidgetState {
  supply: "forward" | "off" | "reverse";
  opening: number; // vent opening while supply is off
}

export interface PanelEvent {
  send?: Message;
  error?: string;
}

const clamp01 = (v: number) => Math.min(1, Math.max(0, v));

export class Panel {
  status: ConnectionStatus = "disconnected";
  session: string | null = null;
  ports: string[] = [];
  limbs: string[] = [];
  widgets = new Map<string, WidgetState>();
  latest: Snapshot | null = null;
  latencyMs: number | null = null;
  lastError: string | null = null;

  private seq = 0;
  private sentAt = new Map<number, number>();
  private readonly subjectDoc: unknown;
  private readonly now: () => number;

  constructor(subjectDoc: unknown, now: () => number = () => Date.now()) {
    this.subjectDoc = subjectDoc;
    this.now = now;
  }

  /** Message to send on a fresh socket: create once, join ever after. */
  onOpen(): Message {
    this.status = "connecting";
    if (this.session !== null) {
      return { type: "join", session: this.session, seq: 0 };
    }
    return { type: "create", seq: 0, payload: { subject: this.subjectDoc } };
  }

  onClose(): void {
    this.status = "disconnected";
  }

  onSocketError(reason: string): void {
    this.status = "error";
    this.lastError = reason;
  }

  handle(msg: Message): PanelEvent {
    switch (msg.type) {
      case "ack":
        return this.handleAck(msg);
      case "snapshot":
        this.latest = msg.payload as Snapshot;
        return {};
      case "error":
        this.lastError = String(msg.payload?.message ?? "unknown error");
        return { error: this.lastError };
      default:
        return {};
    }
  }

  private handleAck(msg: Message): PanelEvent {
    const status = msg.payload?.status;
    if (status === "created" || status === "joined") {
      this.status = "connected";
      this.session = (msg.session as string) ?? this.session;
      this.ports = [...(msg.payload.ports as string[])];
      this.limbs = [...(msg.payload.limbs as string[])];
      for (const port of this.ports) {
        if (!this.widgets.has(port)) {
          this.widgets.set(port, { supply: "off", opening: 1.0 });
        }
      }
      return {};
    }
    if (status === "applied" || status === "stale" || status === "invalid_controls") {
      const sent = this.sentAt.get(msg.seq ?? -1);
      if (sent !== undefined) {
        this.latencyMs = this.now() - sent;
        this.sentAt.delete(msg.seq ?? -1);
      }
      if (status === "invalid_controls") {
        this.lastError = String(msg.payload?.reason ?? "controls refused");
        return { error: this.lastError };
      }
    }
    return {};
  }

  /** Drag a vent slider; emits one frame (or none while disconnected). */
  setOpening(port: string, value: number): PanelEvent {
    const widget = this.widgets.get(port);
    if (!widget || this.status !== "connected") return {};
    widget.opening = clamp01(value);
    if (widget.supply !== "off") return {}; // slider is armed, not active
    return { send: this.controlFrame({ [port]: { role: "vent", opening: widget.opening } }) };
  }

  /** Flip a supply selector; emits one frame patching the whole group. */
  setSupply(port: string, direction: "forward" | "off" | "reverse"): PanelEvent {
    const widget = this.widgets.get(port);
    if (!widget || this.status !== "connected") return {};
    const patch: Record<string, PortRoleJson> = {};
    if (direction === "off") {
      widget.supply = "off";
      patch[port] = { role: "vent", opening: widget.opening };
    } else {
      for (const other of this.ports) {
        if (other !== port && portGroup(other) === portGroup(port)) {
          const w = this.widgets.get(other)!;
          if (w.supply !== "off") {
            w.supply = "off";
            patch[other] = { role: "vent", opening: w.opening };
          }
        }
      }
      widget.supply = direction;
      patch[port] = { role: "supply", direction };
    }
    return { send: this.controlFrame(patch) };
  }

  private controlFrame(ports: Record<string, PortRoleJson>): Message {
    this.seq += 1;
    this.sentAt.set(this.seq, this.now());
    return {
      type: "controls",
      session: this.session,
      seq: this.seq,
      payload: { ports },
    };
  }

  /** Streamed curvature per limb, exactly as received; no physics here. */
  limbCurvatures(): Record<string, number> {
    const out: Record<string, number> = {};
    if (this.latest) {
      for (const [name, limb] of Object.entries(this.latest.limbs)) {
        out[name] = limb.kappa;
      }
    }
    return out;
  }
}
