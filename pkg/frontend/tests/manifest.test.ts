import test from 'node:test';
import assert from 'node:assert/strict';

import { parseCsvManifest, parseJsonlManifest } from '../src/manifest.js';

test('jsonl manifest parses records in order', () => {
  const text =
    '{"id": "a", "content": "hello there", "label": 0}\n' +
    '{"id": "b", "content": "general greeting", "label": 1, "tokens": ["general", "greeting"]}\n';
  const records = parseJsonlManifest(text);
  assert.equal(records.length, 2);
  assert.deepEqual(records.map((r) => r.id), ['a', 'b']);
  assert.deepEqual(records[1].tokens, ['general', 'greeting']);
});

test('jsonl manifest rejects malformed lines with the line number', () => {
  assert.throws(() => parseJsonlManifest('{"id": "a", "content": "x", "label": 0}\n{oops\n'), /line 2/);
});

test('jsonl manifest rejects missing fields', () => {
  assert.throws(() => parseJsonlManifest('{"id": "a", "label": 0}\n'), /content/);
  assert.throws(() => parseJsonlManifest('{"id": "a", "content": "x", "label": 0.5}\n'), /integer/);
});

test('empty manifest rejected', () => {
  assert.throws(() => parseJsonlManifest('\n\n'), /empty manifest/);
});

test('csv manifest parses with quoted fields and tokens', () => {
  const text =
    'id,content,label,tokens\n' +
    'a,"comma, inside",0,comma inside\n' +
    'b,plain text,1,\n';
  const records = parseCsvManifest(text);
  assert.equal(records.length, 2);
  assert.equal(records[0].content, 'comma, inside');
  assert.deepEqual(records[0].tokens, ['comma', 'inside']);
  assert.equal(records[1].tokens, undefined);
});

test('csv manifest requires the header columns', () => {
  assert.throws(() => parseCsvManifest('id,text\na,x\n'), /columns/);
});
