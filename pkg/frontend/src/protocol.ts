/**
 * pitchgrad-extern v1: newline-delimited JSON over stdin/stdout.
 *
 * One banner line announces the worker, then each request line receives
 * exactly one response line, in order.  A malformed or out-of-contract
 * request produces an error response and the session continues.
 */

import { createInterface } from "node:readline";
import type { MetricContext, MetricFn } from "./metrics.js";

export const PROTOCOL_NAME = "pitchgrad-extern";
export const PROTOCOL_VERSION = 1;

export interface ServeOptions {
  metricName: string;
  metric: MetricFn;
  input?: NodeJS.ReadableStream;
  output?: NodeJS.WritableStream;
}

function writeLine(out: NodeJS.WritableStream, value: unknown): Promise<void> {
  return new Promise((resolve) => {
    if (!out.write(JSON.stringify(value) + "\n")) {
      out.once("drain", () => resolve());
    } else {
      resolve();
    }
  });
}

function asSamples(value: unknown, what: string): Float64Array {
  if (!Array.isArray(value)) throw new Error(`${what} must be an array`);
  const arr = new Float64Array(value.length);
  for (let i = 0; i < value.length; i++) {
    const v = value[i];
    if (typeof v !== "number" || !Number.isFinite(v)) {
      throw new Error(`${what}[${i}] is not a finite number`);
    }
    arr[i] = v;
  }
  return arr;
}

export async function serve(opts: ServeOptions): Promise<void> {
  const input = opts.input ?? process.stdin;
  const output = opts.output ?? process.stdout;
  await writeLine(output, {
    protocol: PROTOCOL_NAME,
    version: PROTOCOL_VERSION,
    name: opts.metricName,
  });

  const lines = createInterface({ input, crlfDelay: Infinity });
  for await (const line of lines) {
    if (line.trim() === "") continue;
    let id: unknown = null;
    try {
      const req = JSON.parse(line);
      id = req.id;
      if (typeof req.id !== "number") throw new Error("missing request id");
      const target = asSamples(req.target, "target");
      const prediction = asSamples(req.prediction, "prediction");
      if (target.length !== prediction.length) {
        throw new Error("target and prediction must have equal lengths");
      }
      const ctx: MetricContext = {
        sampleRateHz: typeof req.sample_rate_hz === "number"
          ? req.sample_rate_hz : 44100.0,
      };
      const distance = opts.metric(target, prediction, ctx);
      if (!Number.isFinite(distance) || distance < 0) {
        throw new Error(`metric produced out-of-contract value ${distance}`);
      }
      await writeLine(output, { id: req.id, distance });
    } catch (err) {
      // answer and keep serving: one bad request must not end the session
      await writeLine(output, {
        id: typeof id === "number" ? id : null,
        error: err instanceof Error ? err.message : String(err),
      });
    }
  }
}
