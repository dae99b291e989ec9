/**
 * Encoder backends.
 *
 * `layer-average` mode needs per-layer hidden states plus the subword span of
 * the target token; `sentence-encoder` mode needs one pooled vector for a
 * marked sentence. The stub backend is fully deterministic and runs offline;
 * the hub backend loads a pretrained model through @huggingface/transformers.
 */

export interface TokenSpan {
  start: number;
  end: number; // exclusive subword index
}

export interface LayeredEncoding {
  /** hidden[l][p] is the vector of subword position p at layer l (0 = embedding layer). */
  hidden: Float32Array[][];
  /** subword span of the target token; empty span means the target is unrecoverable */
  span: TokenSpan;
}

export interface Encoder {
  readonly name: string;
  readonly numLayers: number;
  readonly dim: number;
  encodeWithLayers(tokens: string[], targetIndex: number): Promise<LayeredEncoding>;
  encodePooled(markedTokens: string[]): Promise<Float32Array>;
}

// --- deterministic stub ----------------------------------------------------------------

function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Split a token into deterministic pseudo-subwords (chunks of 4 characters). */
export function stubPieces(token: string): string[] {
  const pieces: string[] = [];
  for (let i = 0; i < token.length; i += 4) pieces.push(token.slice(i, i + 4));
  return pieces;
}

/** The stub's "forward pass" for one subword piece at one layer. */
export function stubPieceVector(piece: string, layer: number, dim: number): Float32Array {
  const next = mulberry32(fnv1a(`${piece}\u0000${layer}`));
  const out = new Float32Array(dim);
  for (let d = 0; d < dim; d++) out[d] = next() * 2 - 1;
  return out;
}

export class StubEncoder implements Encoder {
  readonly name: string;
  readonly numLayers: number;
  readonly dim: number;

  constructor(numLayers = 24, dim = 32) {
    this.name = `stub-${numLayers}L-${dim}d`;
    this.numLayers = numLayers;
    this.dim = dim;
  }

  async encodeWithLayers(tokens: string[], targetIndex: number): Promise<LayeredEncoding> {
    const pieceLists = tokens.map(stubPieces);
    const flat = pieceLists.flat();
    const hidden: Float32Array[][] = [];
    for (let l = 0; l <= this.numLayers; l++) {
      hidden.push(flat.map((piece) => stubPieceVector(piece, l, this.dim)));
    }
    let start = 0;
    for (let t = 0; t < targetIndex; t++) start += pieceLists[t].length;
    const end = start + pieceLists[targetIndex].length;
    return { hidden, span: { start, end } };
  }

  async encodePooled(markedTokens: string[]): Promise<Float32Array> {
    // mean over the last layer of every subword, so moving the <t></t>
    // delimiters shifts the pooled output
    const pieces = markedTokens.flatMap((tok, pos) => stubPieces(`${pos}\u0001${tok}`));
    const out = new Float32Array(this.dim);
    for (const piece of pieces) {
      const vec = stubPieceVector(piece, this.numLayers, this.dim);
      for (let d = 0; d < this.dim; d++) out[d] += vec[d];
    }
    for (let d = 0; d < this.dim; d++) out[d] /= pieces.length;
    return out;
  }
}

// --- model-hub backend -----------------------------------------------------------------

export interface HubOptions {
  model: string;
  device?: string;
  dtype?: string;
}

/**
 * Backend over @huggingface/transformers (loaded lazily so offline use of the
 * stub never touches the dependency).
 *
 * Sentence-encoder mode runs a feature-extraction pipeline with mean pooling
 * over the marked sentence. Layer-average mode requires the exported model
 * graph to emit `hidden_states`; exports that only provide the last hidden
 * state raise a clear error suggesting `--mode sentence-encoder` or an
 * explicit `--layers` list over available outputs.
 */
export class HubEncoder implements Encoder {
  readonly name: string;
  readonly numLayers: number;
  readonly dim: number;
  private readonly pipe: any;
  private readonly tokenizer: any;
  private readonly model: any;

  private constructor(name: string, numLayers: number, dim: number, pipe: any, tokenizer: any, model: any) {
    this.name = name;
    this.numLayers = numLayers;
    this.dim = dim;
    this.pipe = pipe;
    this.tokenizer = tokenizer;
    this.model = model;
  }

  static async load(options: HubOptions): Promise<HubEncoder> {
    let transformers: any;
    try {
      transformers = await import('@huggingface/transformers');
    } catch (e) {
      throw new Error(`cannot load @huggingface/transformers: ${(e as Error).message}`);
    }
    const { AutoTokenizer, AutoModel, pipeline } = transformers;
    let tokenizer: any;
    let model: any;
    let pipe: any;
    try {
      tokenizer = await AutoTokenizer.from_pretrained(options.model);
      model = await AutoModel.from_pretrained(options.model, {
        device: options.device,
        dtype: options.dtype ?? 'fp32',
      });
      pipe = await pipeline('feature-extraction', options.model, {
        device: options.device,
        dtype: options.dtype ?? 'fp32',
      });
    } catch (e) {
      throw new Error(`failed to load model ${options.model}: ${(e as Error).message}`);
    }
    const config = model.config ?? {};
    const numLayers = config.num_hidden_layers ?? config.n_layer ?? 0;
    const dim = config.hidden_size ?? config.d_model ?? 0;
    return new HubEncoder(options.model, numLayers, dim, pipe, tokenizer, model);
  }

  async encodeWithLayers(tokens: string[], targetIndex: number): Promise<LayeredEncoding> {
    // Per-token piece counts give the subword span for pre-tokenized input.
    const pieceCounts: number[] = [];
    for (const token of tokens) {
      const enc = await this.tokenizer(token, { add_special_tokens: false });
      pieceCounts.push(enc.input_ids.dims.at(-1) ?? 0);
    }
    const text = tokens.join(' ');
    const inputs = await this.tokenizer(text, { add_special_tokens: true });
    const outputs = await this.model(inputs, { output_hidden_states: true });
    const states = outputs.hidden_states;
    if (!states) {
      throw new Error(
        'model export does not emit hidden_states; use --mode sentence-encoder instead'
      );
    }
    const prefix = this.countSpecialPrefix();
    let start = prefix;
    for (let t = 0; t < targetIndex; t++) start += pieceCounts[t];
    const end = start + pieceCounts[targetIndex];
    const hidden: Float32Array[][] = states.map((tensor: any) => tensorRows(tensor));
    if (pieceCounts[targetIndex] === 0 || end > hidden[0].length) {
      return { hidden, span: { start: 0, end: 0 } };
    }
    return { hidden, span: { start, end } };
  }

  private countSpecialPrefix(): number {
    // tokens added before the content by the tokenizer's template (e.g. [CLS])
    const withSpecial = this.tokenizer.encode ? this.tokenizer.encode('') : [];
    return Array.isArray(withSpecial) ? Math.max(0, withSpecial.length - 1) : 1;
  }

  async encodePooled(markedTokens: string[]): Promise<Float32Array> {
    const output = await this.pipe(markedTokens.join(' '), { pooling: 'mean', normalize: false });
    return Float32Array.from(output.data as Iterable<number>);
  }
}

function tensorRows(tensor: any): Float32Array[] {
  const [, seq, dim] = tensor.dims as number[];
  const data = tensor.data as Float32Array;
  const rows: Float32Array[] = [];
  for (let p = 0; p < seq; p++) rows.push(data.slice(p * dim, (p + 1) * dim));
  return rows;
}
