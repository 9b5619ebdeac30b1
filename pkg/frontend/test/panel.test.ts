import { describe, expect, it } from "vitest";

import { Panel } from "../src/panel.js";
import { Message, Snapshot } from "../src/protocol.js";

const SUBJECT = { type: "gripper", fluid: "water_20c" };

function connectedPanel(ports = ["left", "middle", "right"], limbs = ["a", "b"]) {
  const panel = new Panel(SUBJECT, () => 1000);
  panel.onOpen();
  panel.handle({
    type: "ack",
    session: "s1",
    seq: 0,
    payload: { status: "created", ports, limbs, tick_rate: 50 },
  });
  return panel;
}

function snapshot(kappas: Record<string, number>, tick = 1): Message {
  const limbs: Snapshot["limbs"] = {};
  for (const [k, v] of Object.entries(kappas)) {
    limbs[k] = { kappa: v, delta_p: v / 2e-4, flow: 1e-5 };
  }
  return {
    type: "snapshot",
    session: "s1",
    seq: tick,
    payload: { t: tick / 50, tick, applied_seq: 0, limbs, power: { balanced: true }, ports: {} },
  };
}

describe("connection lifecycle", () => {
  it("creates a session on first open and joins on reconnect", () => {
    const panel = new Panel(SUBJECT);
    const first = panel.onOpen();
    expect(first.type).toBe("create");
    expect(first.payload.subject).toEqual(SUBJECT);
    panel.handle({ type: "ack", session: "s9", seq: 0,
                   payload: { status: "created", ports: ["left"], limbs: ["a"] } });
    expect(panel.status).toBe("connected");
    panel.onClose();
    expect(panel.status).toBe("disconnected");
    const again = panel.onOpen();
    expect(again).toEqual({ type: "join", session: "s9", seq: 0 });
  });

  it("socket failure is a visible error state, not a crash", () => {
    const panel = new Panel(SUBJECT);
    panel.onOpen();
    panel.onSocketError("refused");
    expect(panel.status).toBe("error");
    expect(panel.lastError).toBe("refused");
  });

  it("quadruped ack yields six widgets and four limbs", () => {
    const ports = ["front_left", "front_middle", "front_right",
                   "rear_left", "rear_middle", "rear_right"];
    const panel = connectedPanel(ports, ["front_a", "front_b", "rear_a", "rear_b"]);
    expect(panel.widgets.size).toBe(6);
    expect(panel.limbs.length).toBe(4);
  });
});

describe("control frames", () => {
  it("every interaction emits exactly one frame with strictly increasing seq", () => {
    const panel = connectedPanel();
    const seqs: number[] = [];
    const events = [
      panel.setSupply("middle", "forward"),
      panel.setOpening("left", 0.5),
      panel.setOpening("left", 0.25),
      panel.setSupply("middle", "reverse"),
      panel.setSupply("middle", "off"),
    ];
    for (const ev of events) {
      expect(ev.send).toBeDefined();
      expect(ev.send!.type).toBe("controls");
      seqs.push(ev.send!.seq!);
    }
    for (let i = 1; i < seqs.length; i++) {
      expect(seqs[i]).toBeGreaterThan(seqs[i - 1]);
    }
  });

  it("vent openings clamp to [0, 1]", () => {
    const panel = connectedPanel();
    expect(panel.setOpening("left", 1.7).send!.payload.ports.left.opening).toBe(1);
    expect(panel.setOpening("left", -0.4).send!.payload.ports.left.opening).toBe(0);
  });

  it("turning a supply on moves it within the port group in one frame", () => {
    const panel = connectedPanel();
    panel.setSupply("middle", "forward");
    const ev = panel.setSupply("left", "forward");
    const ports = ev.send!.payload.ports;
    expect(ports.left).toEqual({ role: "supply", direction: "forward" });
    expect(ports.middle.role).toBe("vent");
    expect(Object.keys(ports).sort()).toEqual(["left", "middle"]);
  });

  it("supply switching stays inside its pair group on a quadruped", () => {
    const ports = ["front_left", "front_middle", "front_right",
                   "rear_left", "rear_middle", "rear_right"];
    const panel = connectedPanel(ports, ["front_a", "front_b", "rear_a", "rear_b"]);
    panel.setSupply("front_middle", "forward");
    panel.setSupply("rear_middle", "reverse");
    const ev = panel.setSupply("front_left", "forward");
    const patch = ev.send!.payload.ports;
    expect(Object.keys(patch).sort()).toEqual(["front_left", "front_middle"]);
    expect(panel.widgets.get("rear_middle")!.supply).toBe("reverse");
  });

  it("slider drags while a supply is active do not emit vent frames", () => {
    const panel = connectedPanel();
    panel.setSupply("middle", "forward");
    const ev = panel.setOpening("middle", 0.5);
    expect(ev.send).toBeUndefined();
  });

  it("interactions while disconnected emit nothing", () => {
    const panel = new Panel(SUBJECT);
    expect(panel.setOpening("left", 0.5).send).toBeUndefined();
    expect(panel.setSupply("left", "forward").send).toBeUndefined();
  });

  it("acks update the latency estimate and surface refusals", () => {
    let clock = 1000;
    const panel = new Panel(SUBJECT, () => clock);
    panel.onOpen();
    panel.handle({ type: "ack", session: "s1", seq: 0,
                   payload: { status: "created", ports: ["left", "middle", "right"],
                              limbs: ["a", "b"] } });
    const ev = panel.setSupply("middle", "forward");
    clock = 1023;
    panel.handle({ type: "ack", session: "s1", seq: ev.send!.seq,
                   payload: { status: "applied", effective_tick: 5 } });
    expect(panel.latencyMs).toBe(23);
    const bad = panel.handle({ type: "ack", session: "s1", seq: 99,
                               payload: { status: "invalid_controls", reason: "two supplies" } });
    expect(bad.error).toContain("two supplies");
  });
});

describe("physics stays on the server", () => {
  it("displayed curvatures are exactly the streamed values", () => {
    const panel = connectedPanel();
    const kappas = { a: -32.67109658349272, b: 17.250000000001 };
    panel.handle(snapshot(kappas));
    expect(panel.limbCurvatures()).toEqual(kappas);
  });

  it("user interactions never alter the displayed snapshot", () => {
    const panel = connectedPanel();
    panel.handle(snapshot({ a: 3.5, b: -3.5 }, 7));
    panel.setSupply("middle", "forward");
    panel.setOpening("left", 0.1);
    expect(panel.limbCurvatures()).toEqual({ a: 3.5, b: -3.5 });
    expect(panel.latest!.tick).toBe(7);
  });

  it("reconnecting resets no widget or snapshot state locally", () => {
    const panel = connectedPanel();
    panel.handle(snapshot({ a: 1.0, b: -1.0 }));
    panel.setSupply("middle", "forward");
    panel.onClose();
    const rejoin = panel.onOpen();
    expect(rejoin.type).toBe("join");
    panel.handle({ type: "ack", session: "s1", seq: 0,
                   payload: { status: "joined", ports: ["left", "middle", "right"],
                              limbs: ["a", "b"] } });
    expect(panel.widgets.get("middle")!.supply).toBe("forward");
    expect(panel.limbCurvatures()).toEqual({ a: 1.0, b: -1.0 });
  });
});
