/**
 * Metric registry for the adapter.
 *
 * `waveform_l2` and `spectrogram_l1` are dependency-free and always
 * available.  `embedding` computes the l2 distance between final-layer
 * embeddings produced by a linear projection model loaded from a local
 * JSON asset, mean-pooled over frames (pooling is a documented choice of
 * this adapter, not a claim about any particular published model).  A
 * missing asset degrades to a clear per-request error.
 */

import { readFileSync, existsSync } from "node:fs";
import { resampleLinear, spectrogramL1, waveformL2 } from "./dsp.js";

export interface MetricContext {
  sampleRateHz: number;
}

export type MetricFn = (
  target: Float64Array,
  prediction: Float64Array,
  ctx: MetricContext,
) => number;

export interface AdapterConfig {
  metric: string;
  modelPath?: string;
  /** Named layer inside the model asset; defaults to the final layer. */
  layer?: string;
  resampleToHz?: number;
}

interface EmbeddingModel {
  sample_rate_hz: number;
  frame: number;
  hop: number;
  matrix?: number[][]; // embedding_dim x frame (single-layer form)
  layers?: Record<string, number[][]>;
}

function loadEmbeddingMatrix(path: string, layer?: string): number[][] {
  const doc = JSON.parse(readFileSync(path, "utf-8")) as EmbeddingModel;
  if (!doc.frame || !doc.hop) {
    throw new Error(`not an embedding model asset: ${path}`);
  }
  if (layer !== undefined) {
    const m = doc.layers?.[layer];
    if (!m) throw new Error(`model has no layer "${layer}"`);
    return m;
  }
  if (Array.isArray(doc.matrix)) return doc.matrix;
  const names = Object.keys(doc.layers ?? {});
  if (names.length === 0) throw new Error(`model has no layers: ${path}`);
  return doc.layers![names[names.length - 1]]; // final layer by default
}

function embed(matrix: number[][], frame: number, hop: number,
               x: Float64Array): Float64Array {
  const dim = matrix.length;
  const pooled = new Float64Array(dim);
  let frames = 0;
  for (let start = 0; start + frame <= x.length; start += hop) {
    for (let d = 0; d < dim; d++) {
      const row = matrix[d];
      let acc = 0.0;
      for (let k = 0; k < frame; k++) {
        acc += row[k] * x[start + k];
      }
      pooled[d] += acc;
    }
    frames += 1;
  }
  if (frames === 0) throw new Error("input shorter than one model frame");
  for (let d = 0; d < dim; d++) pooled[d] /= frames; // mean pooling
  return pooled;
}

export function resolveMetric(config: AdapterConfig): { name: string; fn: MetricFn } {
  switch (config.metric) {
    case "waveform_l2":
      return { name: "waveform_l2", fn: (t, p) => waveformL2(t, p) };
    case "spectrogram_l1":
      return { name: "spectrogram_l1", fn: (t, p) => spectrogramL1(t, p) };
    case "embedding": {
      const path = config.modelPath;
      if (!path || !existsSync(path)) {
        // resolvable at startup, but every request gets a diagnostic
        const reason = path
          ? `embedding model asset missing: ${path}`
          : "embedding metric requires --model PATH";
        return {
          name: "embedding(unavailable)",
          fn: () => {
            throw new Error(reason);
          },
        };
      }
      const doc = JSON.parse(readFileSync(path, "utf-8")) as EmbeddingModel;
      const matrix = loadEmbeddingMatrix(path, config.layer);
      const native = config.resampleToHz ?? doc.sample_rate_hz;
      return {
        name: `embedding(${path})`,
        fn: (t, p, ctx) => {
          const tt = resampleLinear(t, ctx.sampleRateHz, native);
          const pp = resampleLinear(p, ctx.sampleRateHz, native);
          return waveformL2(embed(matrix, doc.frame, doc.hop, tt),
                            embed(matrix, doc.frame, doc.hop, pp));
        },
      };
    }
    default:
      throw new Error(
        `unknown metric ${config.metric}; expected waveform_l2, ` +
        `spectrogram_l1 or embedding`,
      );
  }
}
