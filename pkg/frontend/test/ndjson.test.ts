import { describe, expect, it } from "vitest";
import { readLines } from "../src/ndjson.js";

function streamResponse(chunks: (string | Uint8Array)[]): Response {
  const encoder = new TextEncoder();
  const stream = new ReadableStream<Uint8Array>({
    start(controller) {
      for (const chunk of chunks) {
        controller.enqueue(typeof chunk === "string" ? encoder.encode(chunk) : chunk);
      }
      controller.close();
    },
  });
  return new Response(stream);
}

async function collect(response: Response): Promise<string[]> {
  const lines: string[] = [];
  for await (const line of readLines(response)) {
    lines.push(line);
  }
  return lines;
}

describe("readLines", () => {
  it("yields one line per newline-terminated record", async () => {
    const lines = await collect(streamResponse(['{"a":1}\n{"b":2}\n']));
    expect(lines).toEqual(['{"a":1}', '{"b":2}']);
  });

  it("reassembles a line split across chunk boundaries", async () => {
    const lines = await collect(streamResponse(['{"seq"', ":0,", '"t":"q"}\n{"seq":1}\n']));
    expect(lines).toEqual(['{"seq":0,"t":"q"}', '{"seq":1}']);
  });

  it("yields a trailing line that has no final newline", async () => {
    const lines = await collect(streamResponse(['{"a":1}\n{"b"', ":2}"]));
    expect(lines).toEqual(['{"a":1}', '{"b":2}']);
  });

  it("strips CR from CRLF endings and skips blank lines", async () => {
    const lines = await collect(streamResponse(['{"a":1}\r\n\r\n\n{"b":2}\r\n']));
    expect(lines).toEqual(['{"a":1}', '{"b":2}']);
  });

  it("handles a multibyte character split across chunks", async () => {
    const bytes = new TextEncoder().encode('{"q":"übermodel"}\n');
    // split inside the two-byte ü sequence
    const cut = 8;
    const lines = await collect(streamResponse([bytes.slice(0, cut), bytes.slice(cut)]));
    expect(lines).toEqual(['{"q":"übermodel"}']);
    expect(JSON.parse(lines[0]).q).toBe("übermodel");
  });

  it("rejects a response without a body", async () => {
    const response = new Response(null);
    await expect(collect(response)).rejects.toThrow(/no body/);
  });
});
