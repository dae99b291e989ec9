/**
 * Extraction pipeline: occurrences -> one embedding row each, in input order.
 *
 * layer-average mode averages the selected hidden layers first, then the
 * target's subword vectors. sentence-encoder mode marks the target with
 * <t></t> and takes the model's pooled output. Occurrences whose target span
 * cannot be recovered are skipped and logged, never silently re-pooled.
 */

import { Occurrence, markTarget } from './corpus.js';
import { Encoder } from './encoder.js';

export type Mode = 'layer-average' | 'sentence-encoder';
export type LayerGroup = 'first' | 'mid' | 'last';

export const LAYER_GROUPS: Record<LayerGroup, number[]> = {
  first: [1, 2, 3, 4],
  mid: [14, 15, 16, 17],
  last: [21, 22, 23, 24],
};

export interface ExtractorConfig {
  mode: Mode;
  layerGroup?: LayerGroup;
  layers?: number[];
  batchSize: number;
}

export interface Skip {
  id: string;
  reason: string;
}

export interface ExtractResult {
  ids: string[];
  rows: Float32Array[];
  dim: number;
  skipped: Skip[];
}

export function resolveLayers(config: ExtractorConfig, encoder: Encoder): number[] {
  const layers = config.layers ?? LAYER_GROUPS[config.layerGroup ?? 'mid'];
  for (const layer of layers) {
    if (!Number.isInteger(layer) || layer < 0 || layer > encoder.numLayers) {
      throw new Error(
        `layer ${layer} outside encoder depth ${encoder.numLayers}; ` +
          'pass an explicit --layers list for shallower models'
      );
    }
  }
  if (layers.length === 0) throw new Error('empty layer selection');
  return layers;
}

export function averageLayersThenSpan(
  hidden: Float32Array[][],
  layers: number[],
  span: { start: number; end: number },
  dim: number
): Float32Array {
  const out = new Float32Array(dim);
  const perToken = new Float32Array(dim);
  for (let p = span.start; p < span.end; p++) {
    perToken.fill(0);
    for (const l of layers) {
      const vec = hidden[l][p];
      for (let d = 0; d < dim; d++) perToken[d] += vec[d];
    }
    for (let d = 0; d < dim; d++) out[d] += perToken[d] / layers.length;
  }
  const count = span.end - span.start;
  for (let d = 0; d < dim; d++) out[d] /= count;
  return out;
}

export async function extractOccurrences(
  occurrences: Occurrence[],
  encoder: Encoder,
  config: ExtractorConfig,
  log: (message: string) => void = (m) => console.error(m)
): Promise<ExtractResult> {
  const layers = config.mode === 'layer-average' ? resolveLayers(config, encoder) : [];
  const ids: string[] = [];
  const rows: Float32Array[] = [];
  const skipped: Skip[] = [];
  const batchSize = Math.max(1, config.batchSize);

  for (let start = 0; start < occurrences.length; start += batchSize) {
    const batch = occurrences.slice(start, start + batchSize);
    const encoded = await Promise.all(
      batch.map(async (occ) => {
        if (config.mode === 'layer-average') {
          const { hidden, span } = await encoder.encodeWithLayers(occ.tokens, occ.targetIndex);
          if (span.end <= span.start) return { occ, row: null as Float32Array | null, reason: 'target span not recoverable' };
          return { occ, row: averageLayersThenSpan(hidden, layers, span, encoder.dim), reason: '' };
        }
        const row = await encoder.encodePooled(markTarget(occ.tokens, occ.targetIndex));
        return { occ, row, reason: '' };
      })
    );
    for (const { occ, row, reason } of encoded) {
      if (row === null) {
        skipped.push({ id: occ.id, reason });
        log(`skipping ${occ.id}: ${reason}`);
        continue;
      }
      if (row.every((v) => v === 0)) {
        skipped.push({ id: occ.id, reason: 'all-zero embedding' });
        log(`skipping ${occ.id}: all-zero embedding`);
        continue;
      }
      ids.push(occ.id);
      rows.push(row);
    }
  }
  return { ids, rows, dim: encoder.dim, skipped };
}
