import { writeFile } from 'node:fs/promises';

import type { EmbeddingRecord } from './types.js';

const BINARY_MAGIC = 'SCIS';
const BINARY_VERSION = 1;

export type DatasetFormat = 'jsonl' | 'binary';

/** Write records in the core kit's dataset formats (order preserved). */
export async function writeDataset(
  records: EmbeddingRecord[],
  path: string,
  format: DatasetFormat,
): Promise<void> {
  validate(records);
  if (format === 'jsonl') {
    await writeFile(path, toJsonl(records), 'utf-8');
  } else if (format === 'binary') {
    await writeFile(path, toBinary(records));
  } else {
    throw new Error(`unknown format ${format}`);
  }
}

function validate(records: EmbeddingRecord[]): void {
  if (records.length === 0) {
    throw new Error('refusing to write an empty dataset');
  }
  const dim = records[0].vector.length;
  const seen = new Set<string>();
  for (const rec of records) {
    if (rec.vector.length !== dim) {
      throw new Error(`dimension mismatch for record ${rec.id}`);
    }
    for (const x of rec.vector) {
      if (!Number.isFinite(x)) {
        throw new Error(`non-finite value in record ${rec.id}`);
      }
    }
    if (seen.has(rec.id)) {
      throw new Error(`duplicate record id ${rec.id}`);
    }
    seen.add(rec.id);
  }
  if (new Set(records.map((r) => r.label)).size < 2) {
    throw new Error('dataset needs at least 2 distinct labels');
  }
}

export function toJsonl(records: EmbeddingRecord[]): string {
  const lines = records.map((rec) => {
    const obj: Record<string, unknown> = {
      id: rec.id,
      vector: Array.from(rec.vector),
      label: rec.label,
    };
    if (rec.tokens !== undefined) {
      obj.tokens = rec.tokens;
    }
    return JSON.stringify(obj);
  });
  return lines.join('\n') + '\n';
}

/**
 * Binary layout (little-endian), identical to the core kit: magic "SCIS",
 * version u32, n u64, dim u32, label-set size u32, the sorted label set as
 * i32, f32 vectors, i32 labels, then a u64-length UTF-8 id table joined by
 * newlines.
 */
export function toBinary(records: EmbeddingRecord[]): Buffer {
  const n = records.length;
  const dim = records[0].vector.length;
  const labelSet = [...new Set(records.map((r) => r.label))].sort((a, b) => a - b);
  const idBlob = Buffer.from(records.map((r) => r.id).join('\n'), 'utf-8');

  const headerSize = 4 + 4 + 8 + 4 + 4;
  const total =
    headerSize + 4 * labelSet.length + 4 * n * dim + 4 * n + 8 + idBlob.length;
  const buf = Buffer.alloc(total);
  let off = 0;
  buf.write(BINARY_MAGIC, off, 'ascii');
  off += 4;
  off = buf.writeUInt32LE(BINARY_VERSION, off);
  off = buf.writeBigUInt64LE(BigInt(n), off);
  off = buf.writeUInt32LE(dim, off);
  off = buf.writeUInt32LE(labelSet.length, off);
  for (const label of labelSet) {
    off = buf.writeInt32LE(label, off);
  }
  for (const rec of records) {
    for (const x of rec.vector) {
      off = buf.writeFloatLE(Math.fround(x), off);
    }
  }
  for (const rec of records) {
    off = buf.writeInt32LE(rec.label, off);
  }
  off = buf.writeBigUInt64LE(BigInt(idBlob.length), off);
  idBlob.copy(buf, off);
  return buf;
}
