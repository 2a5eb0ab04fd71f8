import { createHash } from 'node:crypto';

import type { Encoder, Pooling } from './types.js';

/**
 * Deterministic feature-hashing encoder for offline runs.
 *
 * Each whitespace token maps to a pseudo-random unit vector derived from the
 * SHA-256 of the token, so the same text always encodes to the same
 * embedding, with no model download. Mean pooling averages the token
 * vectors; cls pooling uses a begin-of-text vector derived from the whole
 * string, mirroring how a [CLS] summary depends on the full input.
 */
export class HashEncoder implements Encoder {
  readonly dim: number;

  constructor(dim = 64) {
    if (dim < 1 || dim > 4096) {
      throw new Error(`hash encoder dim out of range: ${dim}`);
    }
    this.dim = dim;
  }

  async encode(content: string, pooling: Pooling): Promise<Float32Array> {
    if (content.trim().length === 0) {
      throw new Error('cannot encode empty content');
    }
    if (pooling === 'cls') {
      return this.tokenVector(`${content}`);
    }
    const tokens = content.split(/\s+/).filter(Boolean);
    const out = new Float32Array(this.dim);
    for (const token of tokens) {
      const v = this.tokenVector(token);
      for (let i = 0; i < this.dim; i++) {
        out[i] += v[i] / tokens.length;
      }
    }
    return out;
  }

  private tokenVector(token: string): Float32Array {
    const out = new Float32Array(this.dim);
    let counter = 0;
    let offset = 0;
    let block = Buffer.alloc(0);
    let norm = 0;
    for (let i = 0; i < this.dim; i++) {
      if (offset + 4 > block.length) {
        block = createHash('sha256').update(token).update(String(counter++)).digest();
        offset = 0;
      }
      // map 32 bits to [-1, 1)
      out[i] = (block.readUInt32LE(offset) / 2 ** 31) - 1.0;
      norm += out[i] * out[i];
      offset += 4;
    }
    norm = Math.sqrt(norm) || 1.0;
    for (let i = 0; i < this.dim; i++) {
      out[i] /= norm;
    }
    return out;
  }
}

/** Parse "hash:<dim>" model ids; anything else is not a hash encoder. */
export function parseHashModelId(modelId: string): HashEncoder | null {
  const match = /^hash(?::(\d+))?$/.exec(modelId);
  if (!match) return null;
  return new HashEncoder(match[1] ? Number(match[1]) : 64);
}
