/** Occurrence JSONL reading and <t></t> target markup. */

import { readFile } from 'node:fs/promises';

export const OPEN_TAG = '<t>';
export const CLOSE_TAG = '</t>';

export interface Occurrence {
  id: string;
  tokens: string[];
  targetIndex: number;
  lemma: string;
  pos: string;
  concept: string;
  properNoun: boolean;
}

export class CorpusError extends Error {}

export async function readCorpus(path: string): Promise<Occurrence[]> {
  const text = await readFile(path, 'utf-8');
  const occurrences: Occurrence[] = [];
  const seen = new Set<string>();
  const lines = text.split('\n');
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    const where = `${path}:${i + 1}`;
    let record: unknown;
    try {
      record = JSON.parse(line);
    } catch (e) {
      throw new CorpusError(`${where}: invalid JSON`);
    }
    const r = record as Record<string, unknown>;
    if (
      typeof r.id !== 'string' ||
      !Array.isArray(r.tokens) ||
      !r.tokens.every((t) => typeof t === 'string') ||
      typeof r.target_index !== 'number' ||
      typeof r.lemma !== 'string' ||
      typeof r.pos !== 'string' ||
      typeof r.concept !== 'string' ||
      typeof r.proper_noun !== 'boolean'
    ) {
      throw new CorpusError(`${where}: malformed occurrence record`);
    }
    if (r.target_index < 0 || r.target_index >= r.tokens.length) {
      throw new CorpusError(`${where}: target_index out of range`);
    }
    if (seen.has(r.id)) throw new CorpusError(`${where}: duplicate occurrence id ${JSON.stringify(r.id)}`);
    seen.add(r.id);
    occurrences.push({
      id: r.id,
      tokens: r.tokens as string[],
      targetIndex: r.target_index,
      lemma: (r.lemma as string).toLowerCase(),
      pos: r.pos,
      concept: r.concept,
      properNoun: r.proper_noun,
    });
  }
  return occurrences;
}

/** left context, <t>, target, </t>, right context. */
export function markTarget(tokens: string[], targetIndex: number): string[] {
  return [
    ...tokens.slice(0, targetIndex),
    OPEN_TAG,
    tokens[targetIndex],
    CLOSE_TAG,
    ...tokens.slice(targetIndex + 1),
  ];
}
