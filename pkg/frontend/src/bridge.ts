/**
 * Static file server plus WebSocket <-> TCP bridge.
 *
 * Browsers cannot open raw TCP sockets, so the panel connects here over
 * WebSocket and every JSON message is forwarded verbatim to the steering
 * service using its length-delimited TCP framing (and back).  One TCP
 * connection per panel keeps sessions isolated.
 *
 *   node dist/bridge.js [--http-port 8080] [--service-host 127.0.0.1]
 *                       [--service-port 7350]
 */

import * as fs from "node:fs";
import * as http from "node:http";
import * as net from "node:net";
import * as path from "node:path";
import { fileURLToPath } from "node:url";
import { WebSocketServer, WebSocket } from "ws";

import { FrameDecoder, encodeFrame, Message } from "./protocol.js";

export interface BridgeOptions {
  httpPort: number;
  serviceHost: string;
  servicePort: number;
  staticDir?: string;
}

const MIME: Record<string, string> = {
  ".html": "text/html",
  ".js": "text/javascript",
  ".css": "text/css",
  ".json": "application/json",
};

export function startBridge(options: BridgeOptions): Promise<{
  server: http.Server;
  port: number;
  close: () => Promise<void>;
}> {
  const here = path.dirname(fileURLToPath(import.meta.url));
  const staticDir = options.staticDir ?? path.join(here, "..", "public");
  const distDir = here;

  const server = http.createServer((req, res) => {
    const url = (req.url ?? "/").split("?")[0];
    let file: string;
    if (url === "/" || url === "/index.html") {
      file = path.join(staticDir, "index.html");
    } else if (url.startsWith("/js/")) {
      file = path.join(distDir, url.slice(4));
    } else {
      file = path.join(staticDir, url.slice(1));
    }
    if (!fs.existsSync(file) || !fs.statSync(file).isFile()) {
      res.writeHead(404);
      res.end("not found");
      return;
    }
    res.writeHead(200, { "content-type": MIME[path.extname(file)] ?? "application/octet-stream" });
    fs.createReadStream(file).pipe(res);
  });

  const wss = new WebSocketServer({ server, path: "/ws" });
  wss.on("connection", (ws: WebSocket) => {
    const tcp = net.connect(options.servicePort, options.serviceHost);
    const decoder = new FrameDecoder();
    let tcpReady = false;
    const backlog: Message[] = [];

    tcp.on("connect", () => {
      tcpReady = true;
      for (const msg of backlog.splice(0)) {
        tcp.write(encodeFrame(msg));
      }
    });
    tcp.on("data", (chunk: Buffer) => {
      for (const msg of decoder.push(chunk)) {
        if (ws.readyState === WebSocket.OPEN) {
          ws.send(JSON.stringify(msg));
        }
      }
    });
    tcp.on("error", (err) => {
      if (ws.readyState === WebSocket.OPEN) {
        ws.send(JSON.stringify({ type: "error", payload: { message: `service: ${err.message}` } }));
        ws.close();
      }
    });
    tcp.on("close", () => ws.close());

    ws.on("message", (data) => {
      const msg = JSON.parse(data.toString()) as Message;
      if (tcpReady) {
        tcp.write(encodeFrame(msg));
      } else {
        backlog.push(msg);
      }
    });
    ws.on("close", () => tcp.destroy());
    ws.on("error", () => tcp.destroy());
  });

  return new Promise((resolve) => {
    server.listen(options.httpPort, "127.0.0.1", () => {
      const address = server.address();
      const port = typeof address === "object" && address ? address.port : options.httpPort;
      resolve({
        server,
        port,
        close: () =>
          new Promise<void>((done) => {
            for (const client of wss.clients) client.terminate();
            server.close(() => done());
          }),
      });
    });
  });
}

function argValue(flag: string, fallback: string): string {
  const i = process.argv.indexOf(flag);
  return i >= 0 && process.argv[i + 1] !== undefined ? process.argv[i + 1] : fallback;
}

const isMain = process.argv[1] !== undefined &&
  path.resolve(process.argv[1]) === fileURLToPath(import.meta.url);

if (isMain) {
  const options: BridgeOptions = {
    httpPort: Number(argValue("--http-port", "8080")),
    serviceHost: argValue("--service-host", "127.0.0.1"),
    servicePort: Number(argValue("--service-port", "7350")),
  };
  startBridge(options).then(({ port }) => {
    console.log(JSON.stringify({
      panel: `http://127.0.0.1:${port}/`,
      service: `${options.serviceHost}:${options.servicePort}`,
    }));
  });
}
