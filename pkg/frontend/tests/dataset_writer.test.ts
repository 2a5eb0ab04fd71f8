import test from 'node:test';
import assert from 'node:assert/strict';

import { toBinary, toJsonl } from '../src/datasetWriter.js';
import type { EmbeddingRecord } from '../src/types.js';

function records(): EmbeddingRecord[] {
  return [
    { id: 'a', vector: Float32Array.from([1, 2, 3]), label: 0, tokens: ['x'] },
    { id: 'b', vector: Float32Array.from([-0.5, 0.25, 9]), label: 1 },
  ];
}

test('jsonl lines carry the core schema', () => {
  const lines = toJsonl(records()).trim().split('\n');
  assert.equal(lines.length, 2);
  const first = JSON.parse(lines[0]);
  assert.deepEqual(Object.keys(first).sort(), ['id', 'label', 'tokens', 'vector']);
  assert.deepEqual(first.vector, [1, 2, 3]);
  const second = JSON.parse(lines[1]);
  assert.equal(second.tokens, undefined);
});

test('binary layout matches the SCIS header contract', () => {
  const buf = toBinary(records());
  assert.equal(buf.subarray(0, 4).toString('ascii'), 'SCIS');
  let off = 4;
  assert.equal(buf.readUInt32LE(off), 1); // version
  off += 4;
  assert.equal(buf.readBigUInt64LE(off), 2n); // n
  off += 8;
  assert.equal(buf.readUInt32LE(off), 3); // dim
  off += 4;
  assert.equal(buf.readUInt32LE(off), 2); // label-set size
  off += 4;
  assert.equal(buf.readInt32LE(off), 0);
  assert.equal(buf.readInt32LE(off + 4), 1);
  off += 8;
  assert.equal(buf.readFloatLE(off), 1); // first vector value
  off += 4 * 6;
  assert.equal(buf.readInt32LE(off), 0); // labels follow vectors
  assert.equal(buf.readInt32LE(off + 4), 1);
  off += 8;
  const idLen = Number(buf.readBigUInt64LE(off));
  off += 8;
  assert.equal(buf.subarray(off, off + idLen).toString('utf-8'), 'a\nb');
  assert.equal(off + idLen, buf.length);
});

test('dimension mismatches and duplicates rejected', async () => {
  const bad = records();
  bad[1] = { ...bad[1], vector: Float32Array.from([1, 2]) };
  const { writeDataset } = await import('../src/datasetWriter.js');
  await assert.rejects(() => writeDataset(bad, '/tmp/x.jsonl', 'jsonl'), /dimension mismatch/);
  const dup = records();
  dup[1] = { ...dup[1], id: 'a' };
  await assert.rejects(() => writeDataset(dup, '/tmp/x.jsonl', 'jsonl'), /duplicate/);
});
