#!/usr/bin/env node
/** CLI entry: `pitchgrad-adapter --metric NAME [--model PATH --resample-to HZ]`. */

import { parseArgs } from "node:util";
import { resolveMetric } from "./metrics.js";
import { serve } from "./protocol.js";

function main(): void {
  const { values } = parseArgs({
    options: {
      metric: { type: "string", default: "waveform_l2" },
      model: { type: "string" },
      layer: { type: "string" },
      "resample-to": { type: "string" },
      help: { type: "boolean", default: false },
    },
  });
  if (values.help) {
    process.stderr.write(
      "usage: pitchgrad-adapter --metric waveform_l2|spectrogram_l1|embedding" +
      " [--model PATH] [--layer L] [--resample-to HZ]\n",
    );
    process.exit(0);
  }
  const { name, fn } = resolveMetric({
    metric: values.metric as string,
    modelPath: values.model as string | undefined,
    layer: values.layer as string | undefined,
    resampleToHz: values["resample-to"]
      ? Number(values["resample-to"]) : undefined,
  });
  serve({ metricName: name, metric: fn }).catch((err) => {
    process.stderr.write(`fatal: ${err}\n`);
    process.exit(1);
  });
}

main();
