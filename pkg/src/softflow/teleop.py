"""Interactive steering service: live transient simulation over a socket.

One session owns one stepping loop; operators adjust port roles and vent
openings and watch per-limb curvature stream back, the software analogue of
squeezing soft control buttons on a desk rig.

Wire protocol: length-delimited JSON messages on a TCP socket.  Each message
is an ASCII decimal byte count, a newline, then the JSON payload, shaped
{"type", "session", "seq", "payload"}.  Types: create, join, controls,
snapshot, ack, error.  Numbers are serialised with repr, i.e. at full
precision.

The simulation core is plain synchronous code (SessionCore) so a recorded
session can be replayed bit-for-bit without the server.
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import dataclass
from pathlib import Path

from .assembly import (
    ConfigurationError,
    PortRole,
    Supply,
    Vent,
    build_gripper_network,
    build_quadruped_network,
)
from .circuit import SolverOptions, TransientStepper, audit_balanced, power_audit
from .scenario import (
    GripperSubject,
    QuadrupedSubject,
    Scenario,
    ScenarioError,
    parse_port_role,
    parse_subject,
)


def role_to_json(role: PortRole) -> dict:
    if isinstance(role, Supply):
        return {"role": "supply", "direction": role.direction}
    if isinstance(role, Vent):
        return {"role": "vent", "opening": role.opening}
    return {"role": "blocked"}


class SessionCore:
    """Deterministic simulation state machine behind a session.

    Ports are addressed flat: left/middle/right for a gripper and
    front_left .. rear_right for a quadruped.  Sessions start neutral: every
    vent fully open and no supply, so nothing moves until the operator asks.
    """

    def __init__(self, subject, fluids, options: SolverOptions, tick_rate: float):
        if not isinstance(subject, (GripperSubject, QuadrupedSubject)):
            raise ScenarioError("teleop sessions need a gripper or quadruped subject")
        self.subject = subject
        self.fluid = fluids[subject.fluid_name]
        self.options = options
        self.tick_rate = tick_rate
        self.dt = 1.0 / tick_rate
        if isinstance(subject, GripperSubject):
            self._pairs = ("",)
        else:
            self._pairs = ("front", "rear")
        self.roles: dict[str, PortRole] = {}
        for pair in self._pairs:
            for port in ("left", "middle", "right"):
                self.roles[self._flat(pair, port)] = Vent(1.0)
        self.tick = 0
        self.last_seq = 0
        self._build()
        self.stepper = TransientStepper(self.network, self.dt, options=options)

    @staticmethod
    def _flat(pair: str, port: str) -> str:
        return f"{pair}_{port}" if pair else port

    def port_names(self) -> list[str]:
        return sorted(self.roles)

    def limb_names(self) -> list[str]:
        return sorted(self.fragments)

    def _pair_roles(self, pair: str) -> dict[str, PortRole]:
        return {port: self.roles[self._flat(pair, port)]
                for port in ("left", "middle", "right")}

    def _build(self):
        if isinstance(self.subject, GripperSubject):
            asm = self.subject.assembly.with_ports(self._pair_roles(""))
            gnet = build_gripper_network(asm, self.fluid, allow_no_supply=True)
            self.network = gnet.network
            self.fragments = dict(gnet.fragments)
        else:
            from .assembly import QuadrupedAssembly

            asm = QuadrupedAssembly(
                pair_front=self.subject.assembly.pair_front.with_ports(self._pair_roles("front")),
                pair_rear=self.subject.assembly.pair_rear.with_ports(self._pair_roles("rear")))
            qnet = build_quadruped_network(asm, self.fluid, allow_no_supply=True)
            self.network = qnet.network
            self.fragments = qnet.fragments()

    def validate_patch(self, patch: dict[str, PortRole],
                       base: dict[str, PortRole] | None = None) -> dict[str, PortRole]:
        unknown = set(patch) - set(self.roles)
        if unknown:
            raise ConfigurationError(f"unknown ports {sorted(unknown)}")
        merged = dict(self.roles if base is None else base)
        merged.update(patch)
        for pair in self._pairs:
            supplies = sum(isinstance(merged[self._flat(pair, p)], Supply)
                           for p in ("left", "middle", "right"))
            if supplies > 1:
                label = pair or "gripper"
                raise ConfigurationError(f"{label}: more than one supply port")
        return merged

    def apply_patch(self, patch: dict[str, PortRole]):
        self.apply_roles(self.validate_patch(patch))

    def apply_roles(self, merged: dict[str, PortRole]):
        if merged != self.roles:
            self.roles = merged
            self._build()
            self.stepper.set_network(self.network)

    def tick_once(self):
        state = self.stepper.step()
        self.tick += 1
        return self.snapshot(state)

    def snapshot(self, state=None) -> dict:
        state = state or self.stepper.state
        from .actuator import actuator_state

        limbs = {}
        for name in sorted(self.fragments):
            a = actuator_state(state, self.fragments[name])
            limbs[name] = {"kappa": a.curvature, "delta_p": a.delta_p_chambers,
                           "flow": a.flow_through}
        audit = power_audit(state, self.network)
        return {
            "t": self.tick * self.dt,
            "tick": self.tick,
            "applied_seq": self.last_seq,
            "limbs": limbs,
            "power": {**audit, "balanced": audit_balanced(audit, self.options.tol_energy)},
            "ports": {name: role_to_json(role) for name, role in self.roles.items()},
        }


def parse_ports_payload(ports: dict) -> dict[str, PortRole]:
    if not isinstance(ports, dict):
        raise ScenarioError("controls payload must carry a 'ports' object")
    return {name: parse_port_role(spec, f"ports.{name}") for name, spec in ports.items()}


# -- replay -------------------------------------------------------------------


def replay_log(record_path, fluids, options: SolverOptions | None = None):
    """Re-run a recorded session offline; yields the same snapshots.

    The log carries the applied tick of every control frame, so the replay
    is free of timing races: it is the same SessionCore stepped by the same
    schedule.
    """
    options = options or SolverOptions()
    events = []
    with open(record_path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(json.loads(line))
    if not events or events[0]["kind"] != "create":
        raise ValueError("record does not start with a create event")
    head = events[0]
    subject = parse_subject(head["subject"])
    core = SessionCore(subject, fluids, options, head["tick_rate"])
    controls = {}
    last_tick = 0
    for ev in events[1:]:
        if ev["kind"] == "controls":
            controls.setdefault(int(ev["tick"]), []).append(ev["ports"])
            last_tick = max(last_tick, int(ev["tick"]))
        elif ev["kind"] == "snapshot":
            last_tick = max(last_tick, int(ev["tick"]))
    snapshots = [core.snapshot()]
    for k in range(1, last_tick + 1):
        for ports in controls.get(k, []):
            core.apply_patch(parse_ports_payload(ports))
        snapshots.append(core.tick_once())
    return snapshots


# -- server -------------------------------------------------------------------


def _encode(msg: dict) -> bytes:
    data = json.dumps(msg, sort_keys=True).encode()
    return str(len(data)).encode() + b"\n" + data


async def read_message(reader: asyncio.StreamReader) -> dict | None:
    try:
        line = await reader.readline()
        if not line:
            return None
        length = int(line.strip())
        data = await reader.readexactly(length)
    except (asyncio.IncompleteReadError, ValueError, ConnectionError):
        return None
    return json.loads(data)


class _Subscriber:
    def __init__(self):
        self.latest = None
        self.event = asyncio.Event()

    def publish(self, snapshot):
        self.latest = snapshot  # coalesce: slow readers skip to the newest
        self.event.set()


@dataclass
class _Session:
    sid: str
    core: SessionCore
    pending: list
    subscribers: list
    task: asyncio.Task | None = None


class TeleopServer:
    def __init__(self, scenario: Scenario, host: str = "127.0.0.1", port: int = 0,
                 record_path=None):
        self.scenario = scenario
        self.host = host
        self.port = port
        self.record_path = record_path
        self._record_fh = None
        self.sessions: dict[str, _Session] = {}
        self._next_sid = 1
        self._server: asyncio.AbstractServer | None = None

    # -- lifecycle --

    async def start(self):
        if self.record_path:
            Path(self.record_path).parent.mkdir(parents=True, exist_ok=True)
            self._record_fh = open(self.record_path, "w")
        self._server = await asyncio.start_server(self._client, self.host, self.port)
        self.port = self._server.sockets[0].getsockname()[1]
        return self

    async def stop(self):
        for sess in self.sessions.values():
            if sess.task:
                sess.task.cancel()
        for sess in self.sessions.values():
            if sess.task:
                try:
                    await sess.task
                except asyncio.CancelledError:
                    pass
        if self._server:
            self._server.close()
            await self._server.wait_closed()
        if self._record_fh:
            self._record_fh.close()
            self._record_fh = None

    def _record(self, payload: dict):
        if self._record_fh:
            self._record_fh.write(json.dumps(payload, sort_keys=True) + "\n")
            self._record_fh.flush()

    # -- sessions --

    def create_session(self, subject_doc: dict) -> _Session:
        subject = parse_subject(subject_doc)
        core = SessionCore(subject, self.scenario.fluids, self.scenario.solver,
                           self.scenario.teleop.tick_rate)
        sid = f"s{self._next_sid}"
        self._next_sid += 1
        sess = _Session(sid=sid, core=core, pending=[], subscribers=[])
        self.sessions[sid] = sess
        self._record({"kind": "create", "session": sid, "subject": subject_doc,
                      "tick_rate": core.tick_rate})
        sess.task = asyncio.get_running_loop().create_task(self._run_session(sess))
        return sess

    async def _run_session(self, sess: _Session):
        speed = self.scenario.teleop.speed
        dt = sess.core.dt
        first = sess.core.snapshot()
        for sub in sess.subscribers:
            sub.publish({"type": "snapshot", "session": sess.sid,
                         "seq": 0, "payload": first})
        while True:
            if speed > 0.0:
                await asyncio.sleep(dt / speed)
            else:
                await asyncio.sleep(0)
            while sess.pending:
                seq, patch, ports_json = sess.pending.pop(0)
                sess.core.apply_patch(patch)
                sess.core.last_seq = seq
                self._record({"kind": "controls", "session": sess.sid,
                              "tick": sess.core.tick + 1, "seq": seq,
                              "ports": ports_json})
            snapshot = sess.core.tick_once()
            self._record({"kind": "snapshot", "session": sess.sid,
                          "tick": snapshot["tick"], "t": snapshot["t"],
                          "limbs": snapshot["limbs"]})
            msg = {"type": "snapshot", "session": sess.sid,
                   "seq": snapshot["tick"], "payload": snapshot}
            for sub in sess.subscribers:
                sub.publish(msg)

    # -- per-connection --

    async def _client(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        sub = _Subscriber()
        attached: list[_Session] = []
        sender: asyncio.Task | None = None

        async def pump():
            try:
                while True:
                    await sub.event.wait()
                    sub.event.clear()
                    msg = sub.latest
                    if msg is not None:
                        writer.write(_encode(msg))
                        await writer.drain()
            except ConnectionError:
                pass

        try:
            while True:
                msg = await read_message(reader)
                if msg is None:
                    break
                reply = self._dispatch(msg, sub)
                if reply is not None:
                    writer.write(_encode(reply))
                    await writer.drain()
                if (reply and reply.get("type") == "ack"
                        and reply["payload"].get("status") in ("created", "joined")):
                    sess = self.sessions[reply["session"]]
                    attached.append(sess)
                    if sender is None:
                        sender = asyncio.get_running_loop().create_task(pump())
        finally:
            if sender:
                sender.cancel()
                try:
                    await sender
                except asyncio.CancelledError:
                    pass
            for sess in attached:
                if sub in sess.subscribers:
                    sess.subscribers.remove(sub)
            writer.close()
            try:
                await writer.wait_closed()
            except ConnectionError:
                pass

    def _dispatch(self, msg: dict, sub: _Subscriber) -> dict | None:
        mtype = msg.get("type")
        seq = msg.get("seq", 0)
        try:
            if mtype == "create":
                payload = msg.get("payload") or {}
                subject_doc = payload.get("subject")
                if subject_doc is None:
                    raise ScenarioError("create payload needs a 'subject'")
                sess = self.create_session(subject_doc)
                sess.subscribers.append(sub)
                return {"type": "ack", "session": sess.sid, "seq": seq,
                        "payload": {"status": "created",
                                    "ports": sess.core.port_names(),
                                    "limbs": sess.core.limb_names(),
                                    "tick_rate": sess.core.tick_rate}}
            if mtype == "join":
                sess = self.sessions.get(msg.get("session"))
                if sess is None:
                    return _error(msg, "unknown session")
                sess.subscribers.append(sub)
                return {"type": "ack", "session": sess.sid, "seq": seq,
                        "payload": {"status": "joined",
                                    "ports": sess.core.port_names(),
                                    "limbs": sess.core.limb_names(),
                                    "tick_rate": sess.core.tick_rate}}
            if mtype == "controls":
                sess = self.sessions.get(msg.get("session"))
                if sess is None:
                    return _error(msg, "unknown session")
                highest = max([sess.core.last_seq] + [p[0] for p in sess.pending])
                if seq <= highest:
                    return {"type": "ack", "session": sess.sid, "seq": seq,
                            "payload": {"status": "stale", "applied_seq": highest}}
                ports_json = (msg.get("payload") or {}).get("ports") or {}
                try:
                    patch = parse_ports_payload(ports_json)
                    # validate against the roles as they will be once the
                    # already queued frames land
                    speculative = dict(sess.core.roles)
                    for _seq, queued, _json in sess.pending:
                        speculative.update(queued)
                    sess.core.validate_patch(patch, base=speculative)
                except (ScenarioError, ConfigurationError) as exc:
                    return {"type": "ack", "session": sess.sid, "seq": seq,
                            "payload": {"status": "invalid_controls",
                                        "reason": str(exc)}}
                sess.pending.append((seq, patch, ports_json))
                return {"type": "ack", "session": sess.sid, "seq": seq,
                        "payload": {"status": "applied", "effective_tick":
                                    sess.core.tick + 1}}
            return _error(msg, f"unknown message type {mtype!r}")
        except (ScenarioError, ConfigurationError, ValueError) as exc:
            return _error(msg, str(exc))


def _error(msg, reason: str) -> dict:
    return {"type": "error", "session": msg.get("session"),
            "seq": msg.get("seq", 0), "payload": {"message": reason}}


# -- scripted client -----------------------------------------------------------


class TeleopClient:
    """Minimal asyncio client for tests and scripted drives."""

    def __init__(self, host: str, port: int):
        self.host = host
        self.port = port
        self.reader = None
        self.writer = None
        self.session = None
        self._seq = 0

    async def __aenter__(self):
        self.reader, self.writer = await asyncio.open_connection(self.host, self.port)
        return self

    async def __aexit__(self, *exc):
        self.writer.close()
        try:
            await self.writer.wait_closed()
        except ConnectionError:
            pass

    async def send(self, msg: dict):
        self.writer.write(_encode(msg))
        await self.writer.drain()

    async def recv(self, want_type: str | None = None, timeout: float = 10.0) -> dict:
        while True:
            msg = await asyncio.wait_for(read_message(self.reader), timeout)
            if msg is None:
                raise ConnectionError("server closed the stream")
            if want_type is None or msg.get("type") == want_type:
                return msg

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq

    async def create(self, subject_doc: dict) -> dict:
        await self.send({"type": "create", "seq": 0, "payload": {"subject": subject_doc}})
        ack = await self.recv("ack")
        self.session = ack["session"]
        return ack

    async def join(self, session: str) -> dict:
        await self.send({"type": "join", "session": session, "seq": 0})
        ack = await self.recv("ack")
        self.session = session
        return ack

    async def controls(self, ports: dict, seq: int | None = None) -> dict:
        seq = self.next_seq() if seq is None else seq
        await self.send({"type": "controls", "session": self.session, "seq": seq,
                         "payload": {"ports": ports}})
        return await self.recv("ack")

    async def snapshot_after(self, tick: int, timeout: float = 30.0) -> dict:
        while True:
            msg = await self.recv("snapshot", timeout)
            if msg["payload"]["tick"] >= tick:
                return msg["payload"]
