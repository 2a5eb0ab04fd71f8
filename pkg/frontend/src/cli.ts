#!/usr/bin/env node
import { parseArgs } from 'node:util';

import { extract } from './extract.js';
import type { Pooling } from './types.js';
import type { DatasetFormat } from './datasetWriter.js';

const HELP = `usage: declust-extract --manifest m.jsonl|m.csv --out dataset.jsonl
                       [--model Xenova/all-MiniLM-L6-v2 | hash[:dim]]
                       [--pooling mean|cls] [--format jsonl|binary]`;

async function main(): Promise<number> {
  const { values } = parseArgs({
    options: {
      manifest: { type: 'string' },
      out: { type: 'string' },
      model: { type: 'string', default: 'Xenova/all-MiniLM-L6-v2' },
      pooling: { type: 'string', default: 'mean' },
      format: { type: 'string', default: 'jsonl' },
      help: { type: 'boolean', default: false },
    },
  });
  if (values.help || !values.manifest || !values.out) {
    console.error(HELP);
    return values.help ? 0 : 2;
  }
  if (values.pooling !== 'mean' && values.pooling !== 'cls') {
    console.error(`unknown pooling ${values.pooling}`);
    return 2;
  }
  if (values.format !== 'jsonl' && values.format !== 'binary') {
    console.error(`unknown format ${values.format}`);
    return 2;
  }
  const report = await extract(values.manifest, values.out, {
    modelId: values.model as string,
    pooling: values.pooling as Pooling,
    format: values.format as DatasetFormat,
  });
  console.log(JSON.stringify(report, null, 2));
  return 0;
}

main()
  .then((code) => process.exit(code))
  .catch((err) => {
    console.error(JSON.stringify({ status: 'error', message: String(err) }));
    process.exit(1);
  });
