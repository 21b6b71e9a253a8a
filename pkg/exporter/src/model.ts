/**
 * Deterministic stand-in feature extractors.
 *
 * Real deployments swap in pretrained networks; these stand-ins keep the
 * export pipeline exercisable offline. Each model is a seeded random
 * sinusoidal projection, so outputs are bounded, finite, content dependent,
 * and bit-reproducible for a fixed (model, layer, input) triple.
 */
import { Scan } from './formats';

export interface ModelConfig {
  name: string;
  /** Width of per-point embedding vectors. */
  pointDim: number;
  /** Width of per-cell grid vectors. */
  gridDim: number;
  /** Render size of the intermediate range image. */
  imageRows: number;
  imageCols: number;
  /** Default pixels-per-cell used when a job does not override it. */
  patchScale: number;
}

export const MODELS: Record<string, ModelConfig> = {
  'stub-vit': {
    name: 'stub-vit',
    pointDim: 96,
    gridDim: 64,
    imageRows: 48,
    imageCols: 64,
    patchScale: 16,
  },
  'stub-pointnet': {
    name: 'stub-pointnet',
    pointDim: 32,
    gridDim: 16,
    imageRows: 32,
    imageCols: 32,
    patchScale: 8,
  },
};

export function listModelNames(): string[] {
  return Object.keys(MODELS).sort();
}

export function getModel(name: string): ModelConfig {
  const model = MODELS[name];
  if (model === undefined) {
    throw new Error(`unknown model ${name}; known models: ${listModelNames().join(', ')}`);
  }
  return model;
}

// 64-bit arithmetic on BigInt; payloads are small so speed is not a concern.
const MASK64 = (1n << 64n) - 1n;

function fnv1a64(text: string): bigint {
  let hash = 0xcbf29ce484222325n;
  const bytes = Buffer.from(text, 'utf8');
  for (const byte of bytes) {
    hash ^= BigInt(byte);
    hash = (hash * 0x100000001b3n) & MASK64;
  }
  return hash;
}

/** splitmix64 stream seeded from a string key. */
class SeededRng {
  private state: bigint;

  constructor(key: string) {
    this.state = fnv1a64(key);
  }

  nextUint64(): bigint {
    this.state = (this.state + 0x9e3779b97f4a7c15n) & MASK64;
    let z = this.state;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
    return z ^ (z >> 31n);
  }

  /** Uniform in [0, 1) with 53 random bits. */
  nextFloat(): number {
    return Number(this.nextUint64() >> 11n) / 2 ** 53;
  }

  /** Standard normal via Box-Muller. */
  nextGauss(): number {
    const u1 = 1 - this.nextFloat(); // keep log() away from zero
    const u2 = this.nextFloat();
    return Math.sqrt(-2 * Math.log(u1)) * Math.cos(2 * Math.PI * u2);
  }
}

interface Projection {
  inDim: number;
  outDim: number;
  /** Row-major (outDim, inDim) frequency matrix. */
  weights: Float64Array;
  /** Per-output phase offsets. */
  phases: Float64Array;
}

function makeProjection(key: string, inDim: number, outDim: number, freqScale: number): Projection {
  const rng = new SeededRng(key);
  const weights = new Float64Array(outDim * inDim);
  for (let i = 0; i < weights.length; i++) {
    weights[i] = rng.nextGauss() * freqScale;
  }
  const phases = new Float64Array(outDim);
  for (let i = 0; i < outDim; i++) {
    phases[i] = rng.nextFloat() * 2 * Math.PI;
  }
  return { inDim, outDim, weights, phases };
}

function applyProjection(proj: Projection, input: ArrayLike<number>, out: Float64Array, outOffset: number): void {
  for (let k = 0; k < proj.outDim; k++) {
    let acc = proj.phases[k];
    for (let j = 0; j < proj.inDim; j++) {
      acc += proj.weights[k * proj.inDim + j] * input[j];
    }
    out[outOffset + k] = Math.sin(acc);
  }
}

/**
 * Embed every scan point as a sinusoidal projection of [x, y, z, intensity].
 * Returns row-major (n, pointDim) values; scan order is preserved.
 */
export function pointEmbeddings(scan: Scan, model: ModelConfig, layer: number): Float64Array {
  const proj = makeProjection(`${model.name}:point:layer=${layer}`, 4, model.pointDim, 0.7);
  const out = new Float64Array(scan.n * model.pointDim);
  const input = new Float64Array(4);
  for (let i = 0; i < scan.n; i++) {
    input[0] = scan.points[3 * i];
    input[1] = scan.points[3 * i + 1];
    input[2] = scan.points[3 * i + 2];
    input[3] = scan.intensity[i];
    applyProjection(proj, input, out, i * model.pointDim);
  }
  return out;
}

export interface RangeImage {
  rows: number;
  cols: number;
  /** Per-pixel channels: mean depth, mean intensity, log1p(hit count). */
  channels: number;
  /** Row-major (rows, cols, channels) raster. */
  data: Float64Array;
}

const ELEVATION_SPAN = Math.PI / 2; // render covers elevations in [-45deg, +45deg]

/** Rasterize a scan into a spherical range image around the origin. */
export function renderRangeImage(scan: Scan, rows: number, cols: number): RangeImage {
  const channels = 3;
  const data = new Float64Array(rows * cols * channels);
  const depthSum = new Float64Array(rows * cols);
  const intensitySum = new Float64Array(rows * cols);
  const hits = new Float64Array(rows * cols);
  for (let i = 0; i < scan.n; i++) {
    const x = scan.points[3 * i];
    const y = scan.points[3 * i + 1];
    const z = scan.points[3 * i + 2];
    const planar = Math.hypot(x, y);
    const depth = Math.hypot(planar, z);
    const azimuth = planar === 0 && depth === 0 ? 0 : Math.atan2(y, x);
    const elevation = depth === 0 ? 0 : Math.atan2(z, planar);
    let col = Math.floor(((azimuth + Math.PI) / (2 * Math.PI)) * cols);
    let row = Math.floor(((ELEVATION_SPAN / 2 - elevation) / ELEVATION_SPAN) * rows);
    col = Math.min(Math.max(col, 0), cols - 1);
    row = Math.min(Math.max(row, 0), rows - 1);
    const pixel = row * cols + col;
    depthSum[pixel] += depth;
    intensitySum[pixel] += scan.intensity[i];
    hits[pixel] += 1;
  }
  for (let pixel = 0; pixel < rows * cols; pixel++) {
    if (hits[pixel] > 0) {
      data[pixel * channels] = depthSum[pixel] / hits[pixel];
      data[pixel * channels + 1] = intensitySum[pixel] / hits[pixel];
      data[pixel * channels + 2] = Math.log1p(hits[pixel]);
    }
  }
  return { rows, cols, channels, data };
}

export interface GridValues {
  rows: number;
  cols: number;
  dim: number;
  /** Row-major (rows, cols, dim) cell vectors. */
  values: Float64Array;
}

/**
 * Pool an image into patches of patchScale pixels per side and embed each
 * patch. Grid dimensions are the floor of image dims over the patch scale.
 */
export function imageGridValues(
  image: RangeImage,
  model: ModelConfig,
  layer: number,
  patchScale: number,
): GridValues {
  if (!Number.isInteger(patchScale) || patchScale <= 0) {
    throw new Error(`patch scale must be a positive integer, got ${patchScale}`);
  }
  const rows = Math.floor(image.rows / patchScale);
  const cols = Math.floor(image.cols / patchScale);
  const proj = makeProjection(`${model.name}:image:layer=${layer}`, image.channels, model.gridDim, 0.4);
  const values = new Float64Array(rows * cols * model.gridDim);
  const pooled = new Float64Array(image.channels);
  for (let gr = 0; gr < rows; gr++) {
    for (let gc = 0; gc < cols; gc++) {
      pooled.fill(0);
      for (let dr = 0; dr < patchScale; dr++) {
        for (let dc = 0; dc < patchScale; dc++) {
          const pixel = (gr * patchScale + dr) * image.cols + (gc * patchScale + dc);
          for (let c = 0; c < image.channels; c++) {
            pooled[c] += image.data[pixel * image.channels + c];
          }
        }
      }
      const area = patchScale * patchScale;
      for (let c = 0; c < image.channels; c++) {
        pooled[c] /= area;
      }
      applyProjection(proj, pooled, values, (gr * cols + gc) * model.gridDim);
    }
  }
  return { rows, cols, dim: model.gridDim, values };
}
