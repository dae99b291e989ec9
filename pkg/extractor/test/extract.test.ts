import assert from 'node:assert/strict';
import { spawnSync } from 'node:child_process';
import { mkdtemp, readFile, writeFile } from 'node:fs/promises';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { test } from 'node:test';

import { readCaleEmb, writeCaleEmb } from '../src/caleemb.js';
import { Occurrence, markTarget, readCorpus } from '../src/corpus.js';
import { StubEncoder, stubPieceVector, stubPieces } from '../src/encoder.js';
import { LAYER_GROUPS, extractOccurrences, resolveLayers } from '../src/extract.js';

function occ(id: string, tokens: string[], targetIndex: number): Occurrence {
  return {
    id,
    tokens,
    targetIndex,
    lemma: tokens[targetIndex] ?? '',
    pos: 'n',
    concept: 'c1',
    properNoun: false,
  };
}

const OCCS = [
  occ('occ.000', ['the', 'committee', 'did', 'recognize', 'the', 'claim'], 3),
  occ('occ.001', ['a', 'quick', 'glance'], 2),
  occ('occ.002', ['recognize', 'me'], 0),
  occ('occ.003', ['longwordhere', 'short'], 0),
];

test('row order equals input order (layer-average)', async () => {
  const encoder = new StubEncoder(24, 16);
  const result = await extractOccurrences(OCCS, encoder, {
    mode: 'layer-average',
    layerGroup: 'mid',
    batchSize: 2,
  });
  assert.deepEqual(result.ids, OCCS.map((o) => o.id));
  assert.equal(result.dim, 16);
  assert.equal(result.skipped.length, 0);
});

test('unrecoverable target span is skipped and logged', async () => {
  const encoder = new StubEncoder(24, 8);
  const withBad = [OCCS[0], occ('occ.bad', ['ok', '', 'fine'], 1), OCCS[1]];
  const logged: string[] = [];
  const result = await extractOccurrences(
    withBad,
    encoder,
    { mode: 'layer-average', layerGroup: 'mid', batchSize: 8 },
    (m) => logged.push(m)
  );
  assert.deepEqual(result.ids, ['occ.000', 'occ.001']);
  assert.deepEqual(result.skipped, [{ id: 'occ.bad', reason: 'target span not recoverable' }]);
  assert.equal(logged.length, 1);
  assert.match(logged[0], /occ\.bad/);
});

test('layer-average row matches a direct forward pass within 1e-5', async () => {
  const encoder = new StubEncoder(24, 16);
  const target = OCCS[0];
  const result = await extractOccurrences([target], encoder, {
    mode: 'layer-average',
    layerGroup: 'mid',
    batchSize: 1,
  });

  // direct forward pass: average layers 14-17 per subword piece of the
  // target token, then average over the pieces
  const pieces = stubPieces(target.tokens[target.targetIndex]);
  const expected = new Float32Array(16);
  for (const piece of pieces) {
    const perPiece = new Float32Array(16);
    for (const layer of LAYER_GROUPS.mid) {
      const vec = stubPieceVector(piece, layer, 16);
      for (let d = 0; d < 16; d++) perPiece[d] += vec[d];
    }
    for (let d = 0; d < 16; d++) expected[d] += perPiece[d] / LAYER_GROUPS.mid.length;
  }
  for (let d = 0; d < 16; d++) expected[d] /= pieces.length;

  const row = result.rows[0];
  for (let d = 0; d < 16; d++) {
    assert.ok(Math.abs(row[d] - expected[d]) < 1e-5, `dim ${d}: ${row[d]} vs ${expected[d]}`);
  }
});

test('sentence-encoder mode is deterministic and target-sensitive', async () => {
  const encoder = new StubEncoder(12, 10);
  const config = { mode: 'sentence-encoder' as const, batchSize: 4 };
  const a = await extractOccurrences(OCCS, encoder, config);
  const b = await extractOccurrences(OCCS, encoder, config);
  a.rows.forEach((row, i) => assert.deepEqual([...row], [...b.rows[i]]));

  // moving the delimiters changes the pooled vector
  const same = occ('x', ['alpha', 'beta', 'gamma'], 0);
  const moved = occ('y', ['alpha', 'beta', 'gamma'], 2);
  const two = await extractOccurrences([same, moved], encoder, config);
  assert.notDeepEqual([...two.rows[0]], [...two.rows[1]]);
  assert.notDeepEqual(markTarget(same.tokens, 0), markTarget(moved.tokens, 2));
});

test('named layer groups are validated against encoder depth', async () => {
  const shallow = new StubEncoder(6, 8);
  assert.throws(
    () => resolveLayers({ mode: 'layer-average', layerGroup: 'mid', batchSize: 1 }, shallow),
    /--layers/
  );
  const explicit = resolveLayers(
    { mode: 'layer-average', layers: [1, 2], batchSize: 1 },
    shallow
  );
  assert.deepEqual(explicit, [1, 2]);
});

test('output passes the primary toolkit validator', async (t) => {
  const probe = spawnSync('python3', ['-c', 'import cale'], { encoding: 'utf-8' });
  if (probe.status !== 0) {
    t.skip('primary package not importable in this environment');
    return;
  }
  const encoder = new StubEncoder(24, 12);
  const result = await extractOccurrences(OCCS, encoder, {
    mode: 'layer-average',
    layerGroup: 'last',
    batchSize: 4,
  });
  const dir = await mkdtemp(join(tmpdir(), 'cale-extract-'));
  const out = join(dir, 'stub.emb');
  await writeCaleEmb(out, result.ids, result.rows, result.dim);

  const script = [
    'import sys',
    'from cale.embeddings import read_embeddings',
    'm = read_embeddings(sys.argv[1])',
    'print(m.n, m.dim)',
    'print("\\n".join(m.ids))',
  ].join('\n');
  const proc = spawnSync('python3', ['-c', script, out], { encoding: 'utf-8' });
  assert.equal(proc.status, 0, proc.stderr);
  const [shape, ...ids] = proc.stdout.trim().split('\n');
  assert.equal(shape, `${OCCS.length} 12`);
  assert.deepEqual(ids, OCCS.map((o) => o.id));

  const back = await readCaleEmb(out);
  assert.deepEqual(back.ids, result.ids);
});

test('cli extracts a corpus end to end with the stub backend', async () => {
  const dir = await mkdtemp(join(tmpdir(), 'cale-extract-cli-'));
  const corpus = join(dir, 'corpus.jsonl');
  const lines = OCCS.map((o) =>
    JSON.stringify({
      id: o.id,
      tokens: o.tokens,
      target_index: o.targetIndex,
      lemma: o.lemma,
      pos: o.pos,
      concept: o.concept,
      proper_noun: o.properNoun,
    })
  );
  await writeFile(corpus, lines.join('\n') + '\n', 'utf-8');
  const parsed = await readCorpus(corpus);
  assert.equal(parsed.length, OCCS.length);

  const out = join(dir, 'vectors.emb');
  const cliPath = new URL('../src/cli.js', import.meta.url).pathname;
  const proc = spawnSync(
    process.execPath,
    [cliPath, '--corpus', corpus, '--out', out, '--encoder', 'stub', '--mode', 'sentence-encoder'],
    { encoding: 'utf-8' }
  );
  assert.equal(proc.status, 0, proc.stderr);
  assert.match(proc.stdout, /wrote .*4 rows, dim 32/);
  const back = await readCaleEmb(out);
  assert.deepEqual(back.ids, OCCS.map((o) => o.id));
});
