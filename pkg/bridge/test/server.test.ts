import { describe, expect, it } from "vitest";
import { stubScorer } from "../src/scoring";
import { handleLine, splitListen } from "../src/server";

function parse(line: string | null): any {
  expect(line).not.toBeNull();
  return JSON.parse(line as string);
}

describe("handleLine", () => {
  it("answers mono requests with the request id", () => {
    const reply = parse(handleLine(
      '{"id": 7, "kind": "mono", "query": "a", "doc": "a"}', stubScorer));
    expect(reply).toEqual({ id: 7, score: 1.0 });
  });

  it("answers duo requests", () => {
    const reply = parse(handleLine(
      '{"id": "x1", "kind": "duo", "query": "a", "doc": "a", "doc_b": "b"}',
      stubScorer));
    expect(reply).toEqual({ id: "x1", score: 1.0 });
  });

  it("ignores blank lines", () => {
    expect(handleLine("", stubScorer)).toBeNull();
    expect(handleLine("   \t ", stubScorer)).toBeNull();
  });

  it("answers garbage with id null and an error", () => {
    const reply = parse(handleLine("this is not json", stubScorer));
    expect(reply.id).toBeNull();
    expect(typeof reply.error).toBe("string");
  });

  it("keeps the id when the request itself is bad", () => {
    const reply = parse(handleLine(
      '{"id": 3, "kind": "tri", "query": "a", "doc": "b"}', stubScorer));
    expect(reply.id).toBe(3);
    expect(reply.error).toMatch(/unknown kind/);
  });

  it("flags duo requests without doc_b", () => {
    const reply = parse(handleLine(
      '{"id": 4, "kind": "duo", "query": "a", "doc": "b"}', stubScorer));
    expect(reply.error).toMatch(/doc_b/);
  });

  it("flags missing text fields", () => {
    const reply = parse(handleLine('{"id": 5, "kind": "mono"}', stubScorer));
    expect(reply.error).toMatch(/query/);
  });
});

describe("splitListen", () => {
  it("splits host and port", () => {
    expect(splitListen("127.0.0.1:9000")).toEqual(["127.0.0.1", "9000"]);
  });

  it("defaults the host when only a port is given", () => {
    expect(splitListen(":9000")).toEqual(["127.0.0.1", "9000"]);
  });

  it("rejects non-numeric ports", () => {
    expect(() => splitListen("127.0.0.1:http")).toThrow(/HOST:PORT/);
    expect(() => splitListen("nothing")).toThrow(/HOST:PORT/);
  });
});
