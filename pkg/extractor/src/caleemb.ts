/**
 * CALEEMB1 binary embedding files.
 *
 * Layout: 8 magic bytes "CALEEMB1", u32-LE row count n, u32-LE dimension d,
 * n*d float32-LE values row-major, u32-LE byte length of the id block, then
 * n newline-terminated UTF-8 occurrence ids in row order.
 */

import { readFile, writeFile } from 'node:fs/promises';

export const MAGIC = Buffer.from('CALEEMB1', 'ascii');

export interface EmbeddingFile {
  ids: string[];
  dim: number;
  rows: Float32Array[];
}

export class FormatError extends Error {}

export function encodeCaleEmb(ids: string[], rows: Float32Array[], dim: number): Buffer {
  if (ids.length !== rows.length) {
    throw new FormatError(`${ids.length} ids for ${rows.length} rows`);
  }
  if (dim < 1) {
    throw new FormatError(`dimension must be >= 1, got ${dim}`);
  }
  const seen = new Set<string>();
  for (const id of ids) {
    if (id.includes('\n')) throw new FormatError(`id ${JSON.stringify(id)} contains a newline`);
    if (seen.has(id)) throw new FormatError(`duplicate occurrence id ${JSON.stringify(id)}`);
    seen.add(id);
  }
  const payload = Buffer.alloc(rows.length * dim * 4);
  rows.forEach((row, i) => {
    if (row.length !== dim) {
      throw new FormatError(`row ${i} has dimension ${row.length}, expected ${dim}`);
    }
    let allZero = true;
    for (let j = 0; j < dim; j++) {
      const v = row[j];
      if (!Number.isFinite(v)) throw new FormatError(`non-finite value in row ${i}`);
      if (v !== 0) allZero = false;
      payload.writeFloatLE(v, (i * dim + j) * 4);
    }
    if (allZero) throw new FormatError(`all-zero embedding row for id ${JSON.stringify(ids[i])}`);
  });
  const idBlock = Buffer.from(ids.map((id) => id + '\n').join(''), 'utf-8');
  const header = Buffer.alloc(8);
  header.writeUInt32LE(rows.length, 0);
  header.writeUInt32LE(dim, 4);
  const idLen = Buffer.alloc(4);
  idLen.writeUInt32LE(idBlock.length, 0);
  return Buffer.concat([MAGIC, header, payload, idLen, idBlock]);
}

export async function writeCaleEmb(path: string, ids: string[], rows: Float32Array[], dim: number): Promise<void> {
  await writeFile(path, encodeCaleEmb(ids, rows, dim));
}

export function decodeCaleEmb(data: Buffer): EmbeddingFile {
  if (data.length < MAGIC.length + 8 || !data.subarray(0, MAGIC.length).equals(MAGIC)) {
    throw new FormatError('not a CALEEMB1 file (bad magic)');
  }
  const n = data.readUInt32LE(MAGIC.length);
  const dim = data.readUInt32LE(MAGIC.length + 4);
  let off = MAGIC.length + 8;
  const payload = n * dim * 4;
  if (data.length < off + payload + 4) {
    throw new FormatError(`truncated payload (expected ${n}x${dim} float32 rows)`);
  }
  const rows: Float32Array[] = [];
  for (let i = 0; i < n; i++) {
    const row = new Float32Array(dim);
    for (let j = 0; j < dim; j++) row[j] = data.readFloatLE(off + (i * dim + j) * 4);
    rows.push(row);
  }
  off += payload;
  const idLen = data.readUInt32LE(off);
  off += 4;
  if (data.length < off + idLen) throw new FormatError('truncated id block');
  const idBlock = data.subarray(off, off + idLen).toString('utf-8');
  const ids = idBlock.split('\n');
  if (ids.length && ids[ids.length - 1] === '') ids.pop();
  if (ids.length !== n) {
    throw new FormatError(`id count ${ids.length} disagrees with row count ${n}`);
  }
  return { ids, dim, rows };
}

export async function readCaleEmb(path: string): Promise<EmbeddingFile> {
  return decodeCaleEmb(await readFile(path));
}
