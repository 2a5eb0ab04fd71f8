import { readFile } from 'node:fs/promises';

import type { ManifestRecord } from './types.js';

/**
 * Parse a manifest of (id, content, label, optional tokens) records.
 *
 * JSONL manifests hold one object per line; CSV manifests need an
 * `id,content,label[,tokens]` header with tokens space-separated. Record
 * order is preserved.
 */
export async function readManifest(path: string): Promise<ManifestRecord[]> {
  const text = await readFile(path, 'utf-8');
  if (path.endsWith('.csv')) {
    return parseCsvManifest(text);
  }
  return parseJsonlManifest(text);
}

export function parseJsonlManifest(text: string): ManifestRecord[] {
  const records: ManifestRecord[] = [];
  const lines = text.split('\n');
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let obj: unknown;
    try {
      obj = JSON.parse(line);
    } catch {
      throw new Error(`manifest line ${i + 1}: malformed JSON`);
    }
    records.push(validateRecord(obj, i + 1));
  }
  if (records.length === 0) {
    throw new Error('empty manifest');
  }
  return records;
}

export function parseCsvManifest(text: string): ManifestRecord[] {
  const lines = text.split('\n').filter((l) => l.trim().length > 0);
  if (lines.length < 2) {
    throw new Error('empty manifest');
  }
  const header = splitCsvLine(lines[0]).map((h) => h.trim().toLowerCase());
  const idCol = header.indexOf('id');
  const contentCol = header.indexOf('content');
  const labelCol = header.indexOf('label');
  const tokensCol = header.indexOf('tokens');
  if (idCol < 0 || contentCol < 0 || labelCol < 0) {
    throw new Error('CSV manifest needs id, content and label columns');
  }
  return lines.slice(1).map((line, i) => {
    const cells = splitCsvLine(line);
    const record: ManifestRecord = {
      id: cells[idCol],
      content: cells[contentCol],
      label: Number(cells[labelCol]),
    };
    if (tokensCol >= 0 && cells[tokensCol]) {
      record.tokens = cells[tokensCol].split(/\s+/).filter(Boolean);
    }
    return validateRecord(record, i + 2);
  });
}

function splitCsvLine(line: string): string[] {
  // minimal quoted-field CSV: enough for text manifests with commas
  const cells: string[] = [];
  let cell = '';
  let quoted = false;
  for (let i = 0; i < line.length; i++) {
    const ch = line[i];
    if (quoted) {
      if (ch === '"' && line[i + 1] === '"') {
        cell += '"';
        i++;
      } else if (ch === '"') {
        quoted = false;
      } else {
        cell += ch;
      }
    } else if (ch === '"') {
      quoted = true;
    } else if (ch === ',') {
      cells.push(cell);
      cell = '';
    } else {
      cell += ch;
    }
  }
  cells.push(cell);
  return cells.map((c) => c.replace(/\r$/, ''));
}

function validateRecord(obj: unknown, line: number): ManifestRecord {
  const rec = obj as Partial<ManifestRecord>;
  if (typeof rec.id !== 'string' || rec.id.length === 0) {
    throw new Error(`manifest line ${line}: missing id`);
  }
  if (typeof rec.content !== 'string') {
    throw new Error(`manifest line ${line}: missing content for ${rec.id}`);
  }
  const label = Number(rec.label);
  if (!Number.isInteger(label)) {
    throw new Error(`manifest line ${line}: label of ${rec.id} must be an integer`);
  }
  const out: ManifestRecord = { id: rec.id, content: rec.content, label };
  if (rec.tokens !== undefined) {
    if (!Array.isArray(rec.tokens) || rec.tokens.some((t) => typeof t !== 'string')) {
      throw new Error(`manifest line ${line}: tokens of ${rec.id} must be strings`);
    }
    out.tokens = rec.tokens;
  }
  return out;
}
