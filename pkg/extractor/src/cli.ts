#!/usr/bin/env node
/**
 * cale-extract: produce a CALEEMB1 embedding file from an occurrence JSONL.
 *
 *   cale-extract --corpus occurrences.jsonl --out vectors.emb \
 *       --encoder hub --model <model-id> --mode layer-average --layer-group mid
 *
 * `--encoder stub` runs the deterministic offline encoder (useful for format
 * plumbing and tests; no model download).
 */

import { parseArgs } from 'node:util';

import { writeCaleEmb } from './caleemb.js';
import { readCorpus } from './corpus.js';
import { Encoder, HubEncoder, StubEncoder } from './encoder.js';
import { ExtractorConfig, LayerGroup, Mode, extractOccurrences } from './extract.js';

function usageError(message: string): never {
  console.error(`error: ${message}`);
  console.error('see source header for usage');
  process.exit(2);
}

export async function main(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: {
      corpus: { type: 'string' },
      out: { type: 'string' },
      mode: { type: 'string', default: 'layer-average' },
      encoder: { type: 'string', default: 'hub' },
      model: { type: 'string' },
      'layer-group': { type: 'string', default: 'mid' },
      layers: { type: 'string' },
      'batch-size': { type: 'string', default: '8' },
      device: { type: 'string' },
      'stub-layers': { type: 'string', default: '24' },
      'stub-dim': { type: 'string', default: '32' },
    },
  });

  if (!values.corpus || !values.out) usageError('--corpus and --out are required');
  const mode = values.mode as Mode;
  if (mode !== 'layer-average' && mode !== 'sentence-encoder') {
    usageError(`unknown mode ${values.mode}`);
  }
  const group = values['layer-group'] as LayerGroup;
  if (!['first', 'mid', 'last'].includes(group)) usageError(`unknown layer group ${group}`);

  let encoder: Encoder;
  if (values.encoder === 'stub') {
    encoder = new StubEncoder(Number(values['stub-layers']), Number(values['stub-dim']));
  } else if (values.encoder === 'hub') {
    if (!values.model) usageError('--model is required with --encoder hub');
    encoder = await HubEncoder.load({ model: values.model, device: values.device });
  } else {
    usageError(`unknown encoder backend ${values.encoder}`);
  }

  const config: ExtractorConfig = {
    mode,
    layerGroup: group,
    layers: values.layers ? values.layers.split(',').map(Number) : undefined,
    batchSize: Number(values['batch-size']),
  };

  const occurrences = await readCorpus(values.corpus);
  const result = await extractOccurrences(occurrences, encoder, config);
  await writeCaleEmb(values.out, result.ids, result.rows, result.dim);
  console.log(
    `wrote ${values.out}: ${result.ids.length} rows, dim ${result.dim}` +
      (result.skipped.length ? `, ${result.skipped.length} skipped` : '')
  );
  return 0;
}

const invokedDirectly = process.argv[1] && import.meta.url.endsWith(process.argv[1].split('/').pop()!);
if (invokedDirectly) {
  main(process.argv.slice(2)).then(
    (code) => process.exit(code),
    (err) => {
      console.error(`error: ${err.message}`);
      process.exit(1);
    }
  );
}
