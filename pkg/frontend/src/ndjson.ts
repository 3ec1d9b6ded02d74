/**
 * Incremental NDJSON line reader over a fetch Response body.
 *
 * Chunks arrive at arbitrary boundaries, so we buffer the tail until the
 * next newline shows up. The final buffered fragment (a line without a
 * trailing newline) is still yielded when the stream closes.
 */
export async function* readLines(response: Response): AsyncGenerator<string> {
  if (!response.body) {
    throw new Error("response has no body to stream");
  }
  const reader = response.body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";

  try {
    for (;;) {
      const { done, value } = await reader.read();
      if (done) {
        break;
      }
      buffer += decoder.decode(value, { stream: true });
      const parts = buffer.split("\n");
      buffer = parts.pop() ?? "";
      for (const part of parts) {
        const line = part.endsWith("\r") ? part.slice(0, -1) : part;
        if (line.trim() !== "") {
          yield line;
        }
      }
    }
  } finally {
    reader.releaseLock();
  }

  buffer += decoder.decode();
  const tail = buffer.trim();
  if (tail !== "") {
    yield tail;
  }
}
