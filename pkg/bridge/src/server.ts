// Newline-JSON scorer server, stdio or TCP.
//
// Handshake {"ready": true, "tag"} on connect, then one response per
// request line. Requests: {"id", "kind": "mono"|"duo", "query", "doc"
// [, "doc_b"]}. A malformed line answers {"id": null, "error"} and the
// server keeps serving; only startup problems are fatal.

import * as net from "net";
import * as readline from "readline";
import { Scorer } from "./scoring";

export interface BridgeConfig {
  listen: string | null; // "HOST:PORT", or null for stdio
  tag: string;
  scorer: Scorer;
}

export function handleLine(line: string, scorer: Scorer): string | null {
  const trimmed = line.trim();
  if (!trimmed) {
    return null;
  }
  let id: unknown = null;
  try {
    const request = JSON.parse(trimmed);
    if (typeof request !== "object" || request === null) {
      throw new Error("request must be a JSON object");
    }
    id = request.id ?? null;
    const { kind, query, doc, doc_b: docB } = request;
    if (typeof query !== "string" || typeof doc !== "string") {
      throw new Error("request needs string fields 'query' and 'doc'");
    }
    let score: number;
    if (kind === "mono") {
      score = scorer.monoScore(query, doc);
    } else if (kind === "duo") {
      if (typeof docB !== "string") {
        throw new Error("duo request needs a string field 'doc_b'");
      }
      score = scorer.duoScore(query, doc, docB);
    } else {
      throw new Error(`unknown kind ${JSON.stringify(kind)}`);
    }
    return JSON.stringify({ id, score });
  } catch (error) {
    const message = error instanceof Error ? error.message : String(error);
    return JSON.stringify({ id, error: message });
  }
}

function greeting(tag: string): string {
  return JSON.stringify({ ready: true, tag });
}

function serveStream(
  input: NodeJS.ReadableStream,
  write: (line: string) => void,
  config: BridgeConfig,
): void {
  write(greeting(config.tag));
  const lines = readline.createInterface({ input, terminal: false });
  lines.on("line", (line) => {
    const response = handleLine(line, config.scorer);
    if (response !== null) {
      write(response);
    }
  });
}

export function serveStdio(config: BridgeConfig): void {
  serveStream(process.stdin, (line) => process.stdout.write(line + "\n"),
    config);
}

export function serveTcp(config: BridgeConfig): void {
  const [host, portText] = splitListen(config.listen as string);
  const server = net.createServer((socket) => {
    socket.on("error", () => socket.destroy()); // client went away mid-write
    serveStream(socket, (line) => socket.write(line + "\n"), config);
  });
  server.on("error", (error) => {
    process.stderr.write(`cannot listen on ${config.listen}: ${error.message}\n`);
    process.exit(1);
  });
  server.listen(Number(portText), host, () => {
    process.stderr.write(`listening on ${host}:${portText}\n`);
  });
}

export function splitListen(listen: string): [string, string] {
  const colon = listen.lastIndexOf(":");
  const host = colon > 0 ? listen.slice(0, colon) : "127.0.0.1";
  const portText = listen.slice(colon + 1);
  const port = Number(portText);
  if (!Number.isInteger(port) || port < 0 || port > 65535) {
    throw new Error(`--listen needs HOST:PORT, got ${JSON.stringify(listen)}`);
  }
  return [host, portText];
}
