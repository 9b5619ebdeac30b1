/** Browser entry: binds the panel state machine to the DOM and canvas. */

import { arcPoints } from "./arcs.js";
import { Panel } from "./panel.js";
import { Message } from "./protocol.js";

const LIMB_LENGTH_M = 0.1;
const LIMB_COLORS = ["#2a7de1", "#e1572a", "#2ab36a", "#8d2ae1"];

const subjectInput = document.getElementById("subject") as HTMLTextAreaElement;
const addressInput = document.getElementById("address") as HTMLInputElement;
const connectButton = document.getElementById("connect") as HTMLButtonElement;
const statusBanner = document.getElementById("status") as HTMLDivElement;
const widgetsDiv = document.getElementById("widgets") as HTMLDivElement;
const canvas = document.getElementById("limbs") as HTMLCanvasElement;
const readout = document.getElementById("readout") as HTMLPreElement;

let panel: Panel | null = null;
let socket: WebSocket | null = null;

function send(msg: Message) {
  if (socket && socket.readyState === WebSocket.OPEN) {
    socket.send(JSON.stringify(msg));
  }
}

function setStatus(text: string, kind: string) {
  statusBanner.textContent = text;
  statusBanner.className = `status ${kind}`;
}

function connect() {
  const subject = JSON.parse(subjectInput.value);
  const existing = panel;
  panel = existing && existing.session ? existing : new Panel(subject);
  socket?.close();
  socket = new WebSocket(addressInput.value);
  setStatus("connecting...", "pending");

  socket.onopen = () => send(panel!.onOpen());
  socket.onclose = () => {
    panel?.onClose();
    setStatus("disconnected (retry with Connect)", "bad");
  };
  socket.onerror = () => {
    panel?.onSocketError("socket error");
    setStatus("connection failed", "bad");
  };
  socket.onmessage = (ev) => {
    const msg = JSON.parse(ev.data) as Message;
    const before = panel!.ports.length;
    const event = panel!.handle(msg);
    if (event.error) setStatus(event.error, "bad");
    if (panel!.status === "connected") {
      setStatus(`session ${panel!.session} | latency ${panel!.latencyMs ?? "-"} ms`, "ok");
      if (panel!.ports.length !== before || widgetsDiv.childElementCount === 0) {
        buildWidgets();
      }
    }
  };
}

function buildWidgets() {
  widgetsDiv.replaceChildren();
  for (const port of panel!.ports) {
    const row = document.createElement("div");
    row.className = "widget";
    const label = document.createElement("span");
    label.textContent = port;
    row.appendChild(label);

    const select = document.createElement("select");
    for (const option of ["off", "forward", "reverse"]) {
      const el = document.createElement("option");
      el.value = option;
      el.textContent = `supply ${option}`;
      select.appendChild(el);
    }
    select.onchange = () => {
      const event = panel!.setSupply(port, select.value as "forward" | "off" | "reverse");
      if (event.send) send(event.send);
      refreshWidgetStates();
    };
    row.appendChild(select);

    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = "0";
    slider.max = "1";
    slider.step = "0.01";
    slider.value = "1";
    slider.oninput = () => {
      const event = panel!.setOpening(port, Number(slider.value));
      if (event.send) send(event.send);
    };
    row.appendChild(slider);
    row.dataset.port = port;
    widgetsDiv.appendChild(row);
  }
  refreshWidgetStates();
}

function refreshWidgetStates() {
  for (const row of widgetsDiv.children) {
    const port = (row as HTMLElement).dataset.port!;
    const widget = panel!.widgets.get(port)!;
    const select = row.querySelector("select") as HTMLSelectElement;
    const slider = row.querySelector("input") as HTMLInputElement;
    select.value = widget.supply;
    slider.disabled = widget.supply !== "off";
  }
}

function draw() {
  requestAnimationFrame(draw);
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!panel || !panel.latest) return;

  const kappas = panel.limbCurvatures();
  const names = Object.keys(kappas).sort();
  const scale = 1.8 * canvas.height; // px per metre
  names.forEach((name, i) => {
    const originX = ((i + 1) * canvas.width) / (names.length + 1);
    const originY = canvas.height * 0.85;
    const pts = arcPoints(kappas[name], LIMB_LENGTH_M, 48);
    ctx.beginPath();
    pts.forEach((p, j) => {
      // limb hangs downward; streamed curvature bends it sideways
      const x = originX + p.y * scale;
      const y = originY - p.x * scale;
      if (j === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.lineWidth = 6;
    ctx.lineCap = "round";
    ctx.strokeStyle = LIMB_COLORS[i % LIMB_COLORS.length];
    ctx.stroke();
    ctx.fillStyle = "#333";
    ctx.fillText(`${name}  k=${kappas[name].toFixed(2)} 1/m`, originX - 30, originY + 16);
  });
  const snap = panel.latest;
  readout.textContent = `t=${snap.t.toFixed(2)} s  tick=${snap.tick}  power balanced=${snap.power["balanced"]}`;
}

connectButton.onclick = connect;
draw();
