export interface ManifestRecord {
  id: string;
  content: string;
  label: number;
  tokens?: string[];
}

export type Pooling = 'cls' | 'mean';

export interface Encoder {
  /** Embedding dimension, known once the backend is loaded. */
  readonly dim: number;
  /** Encode one text into a fixed-length vector under the given pooling. */
  encode(content: string, pooling: Pooling): Promise<Float32Array>;
}

export interface EmbeddingRecord {
  id: string;
  vector: Float32Array;
  label: number;
  tokens?: string[];
}

export interface ExtractReport {
  written: number;
  skipped: { id: string; reason: string }[];
  dim: number;
  backend: string;
}
