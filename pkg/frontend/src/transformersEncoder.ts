import type { Encoder, Pooling } from './types.js';

type FeaturePipeline = (
  text: string,
  options: { pooling: 'mean' | 'cls'; normalize: boolean },
) => Promise<{ data: Float32Array | number[]; dims: number[] }>;

/**
 * Pretrained-encoder backend over @huggingface/transformers.
 *
 * Loads a feature-extraction pipeline once and reuses it; the pipeline's own
 * pooling handles mean-over-non-padding and CLS readout. Model load failures
 * surface as errors so callers can fall back or abort.
 */
export class TransformersEncoder implements Encoder {
  private constructor(
    private readonly pipe: FeaturePipeline,
    readonly dim: number,
    readonly modelId: string,
  ) {}

  static async load(modelId: string): Promise<TransformersEncoder> {
    let transformers: typeof import('@huggingface/transformers');
    try {
      transformers = await import('@huggingface/transformers');
    } catch (err) {
      throw new Error(`transformers backend unavailable: ${String(err)}`);
    }
    let pipe: FeaturePipeline;
    try {
      pipe = (await transformers.pipeline('feature-extraction', modelId, {
        dtype: 'q8',
      })) as unknown as FeaturePipeline;
    } catch (err) {
      throw new Error(`failed to load model ${modelId}: ${String(err)}`);
    }
    const probe = await pipe('dimension probe', { pooling: 'mean', normalize: false });
    const dim = probe.dims[probe.dims.length - 1];
    return new TransformersEncoder(pipe, dim, modelId);
  }

  async encode(content: string, pooling: Pooling): Promise<Float32Array> {
    if (content.trim().length === 0) {
      throw new Error('cannot encode empty content');
    }
    const out = await this.pipe(content, { pooling, normalize: false });
    return Float32Array.from(out.data);
  }
}
