import { readManifest } from './manifest.js';
import { parseHashModelId } from './hashEncoder.js';
import { TransformersEncoder } from './transformersEncoder.js';
import { writeDataset, type DatasetFormat } from './datasetWriter.js';
import type { EmbeddingRecord, Encoder, ExtractReport, ManifestRecord, Pooling } from './types.js';

export interface ExtractOptions {
  modelId: string; // HF model id, or "hash[:dim]" for the offline encoder
  pooling?: Pooling; // default mean over non-padding positions
  format?: DatasetFormat;
  log?: (message: string) => void;
}

export async function loadEncoder(modelId: string): Promise<Encoder> {
  const hash = parseHashModelId(modelId);
  if (hash) return hash;
  return TransformersEncoder.load(modelId);
}

/**
 * Encode a manifest with a pretrained (or hashing) encoder and write the
 * core kit's dataset format.
 *
 * Records that fail to encode are skipped and logged rather than aborting
 * the batch; output order follows manifest order.
 */
export async function extract(
  manifestPath: string,
  outputPath: string,
  options: ExtractOptions,
): Promise<ExtractReport> {
  const log = options.log ?? ((msg: string) => console.error(msg));
  const pooling = options.pooling ?? 'mean';
  const manifest = await readManifest(manifestPath);
  const encoder = await loadEncoder(options.modelId);

  const { records, skipped } = await encodeManifest(manifest, encoder, pooling, log);
  await writeDataset(records, outputPath, options.format ?? 'jsonl');
  return {
    written: records.length,
    skipped,
    dim: encoder.dim,
    backend: options.modelId,
  };
}

export async function encodeManifest(
  manifest: ManifestRecord[],
  encoder: Encoder,
  pooling: Pooling,
  log: (message: string) => void,
): Promise<{ records: EmbeddingRecord[]; skipped: { id: string; reason: string }[] }> {
  const records: EmbeddingRecord[] = [];
  const skipped: { id: string; reason: string }[] = [];
  for (const item of manifest) {
    try {
      const vector = await encoder.encode(item.content, pooling);
      records.push({ id: item.id, vector, label: item.label, tokens: item.tokens });
    } catch (err) {
      const reason = err instanceof Error ? err.message : String(err);
      skipped.push({ id: item.id, reason });
      log(`skipping record ${item.id}: ${reason}`);
    }
  }
  return { records, skipped };
}
