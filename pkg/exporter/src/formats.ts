/**
 * Binary readers and writers shared with the ncutseg pipeline.
 *
 * All files are little-endian regardless of host byte order:
 *   scan  .bin  : rows of [x, y, z, intensity] as float32, no header
 *   bank  .aifb : "AIFB" | u32 version | u8 kind | u32 n | u32 dim | n*dim float32
 *   grid  .grid : "AIFG" | u32 version | u32 rows | u32 cols | u32 dim | f32 scale | payload float32
 */
import { readFileSync, writeFileSync } from 'fs';

export const FORMAT_VERSION = 1;
export const FEATURE_MAGIC = 'AIFB';
export const GRID_MAGIC = 'AIFG';

export type FeatureKind = 'P' | 'I';

const KIND_CODES: Record<FeatureKind, number> = { P: 1, I: 2 };
const KIND_NAMES: Record<number, FeatureKind> = { 1: 'P', 2: 'I' };

const FEATURE_HEADER_LEN = 4 + 4 + 1 + 4 + 4;
const GRID_HEADER_LEN = 4 + 4 * 4 + 4;

export interface Scan {
  /** Point count. */
  n: number;
  /** Row-major [x, y, z] triples, length 3 * n. */
  points: Float64Array;
  /** Per-point intensity, length n. */
  intensity: Float64Array;
}

export interface FeatureBank {
  kind: FeatureKind;
  n: number;
  dim: number;
  /** Row-major vectors, length n * dim. */
  values: Float64Array;
}

export interface FeatureGrid {
  rows: number;
  cols: number;
  dim: number;
  /** Pixels per grid cell along each image axis. */
  scale: number;
  /** Row-major (rows, cols, dim) payload, length rows * cols * dim. */
  values: Float64Array;
}

function writeFloat32Payload(view: DataView, offset: number, values: ArrayLike<number>): void {
  for (let i = 0; i < values.length; i++) {
    view.setFloat32(offset + 4 * i, values[i], true);
  }
}

function readFloat32Payload(view: DataView, offset: number, count: number): Float64Array {
  const out = new Float64Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = view.getFloat32(offset + 4 * i, true);
  }
  return out;
}

function viewOf(buf: Buffer): DataView {
  return new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
}

export function readScanFile(path: string): Scan {
  const buf = readFileSync(path);
  if (buf.length % 16 !== 0) {
    throw new Error(`scan file size ${buf.length} is not a multiple of 16: ${path}`);
  }
  const n = buf.length / 16;
  const view = viewOf(buf);
  const points = new Float64Array(3 * n);
  const intensity = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    points[3 * i] = view.getFloat32(16 * i, true);
    points[3 * i + 1] = view.getFloat32(16 * i + 4, true);
    points[3 * i + 2] = view.getFloat32(16 * i + 8, true);
    intensity[i] = view.getFloat32(16 * i + 12, true);
  }
  for (let i = 0; i < points.length; i++) {
    if (!Number.isFinite(points[i])) {
      throw new Error(`scan file contains non-finite values: ${path}`);
    }
  }
  return { n, points, intensity };
}

export function writeScanFile(path: string, scan: Scan): void {
  if (scan.points.length !== 3 * scan.n || scan.intensity.length !== scan.n) {
    throw new Error('scan arrays do not match the declared point count');
  }
  const buf = Buffer.alloc(16 * scan.n);
  const view = viewOf(buf);
  for (let i = 0; i < scan.n; i++) {
    view.setFloat32(16 * i, scan.points[3 * i], true);
    view.setFloat32(16 * i + 4, scan.points[3 * i + 1], true);
    view.setFloat32(16 * i + 8, scan.points[3 * i + 2], true);
    view.setFloat32(16 * i + 12, scan.intensity[i], true);
  }
  writeFileSync(path, buf);
}

export function writeFeatureFile(path: string, bank: FeatureBank): void {
  if (!(bank.kind in KIND_CODES)) {
    throw new Error(`unknown feature kind ${bank.kind}`);
  }
  if (bank.dim <= 0) {
    throw new Error('feature dimension must be positive');
  }
  if (bank.values.length !== bank.n * bank.dim) {
    throw new Error(`feature payload length ${bank.values.length} != n * dim = ${bank.n * bank.dim}`);
  }
  const buf = Buffer.alloc(FEATURE_HEADER_LEN + 4 * bank.n * bank.dim);
  buf.write(FEATURE_MAGIC, 0, 'ascii');
  const view = viewOf(buf);
  view.setUint32(4, FORMAT_VERSION, true);
  view.setUint8(8, KIND_CODES[bank.kind]);
  view.setUint32(9, bank.n, true);
  view.setUint32(13, bank.dim, true);
  writeFloat32Payload(view, FEATURE_HEADER_LEN, bank.values);
  writeFileSync(path, buf);
}

export function readFeatureFile(path: string): FeatureBank {
  const buf = readFileSync(path);
  if (buf.length < FEATURE_HEADER_LEN) {
    throw new Error(`feature file truncated header: ${path}`);
  }
  if (buf.toString('ascii', 0, 4) !== FEATURE_MAGIC) {
    throw new Error(`bad feature file magic: ${path}`);
  }
  const view = viewOf(buf);
  const version = view.getUint32(4, true);
  if (version !== FORMAT_VERSION) {
    throw new Error(`unsupported feature file version ${version}: ${path}`);
  }
  const kindCode = view.getUint8(8);
  const kind = KIND_NAMES[kindCode];
  if (kind === undefined) {
    throw new Error(`unknown feature kind code ${kindCode}: ${path}`);
  }
  const n = view.getUint32(9, true);
  const dim = view.getUint32(13, true);
  if (dim === 0) {
    throw new Error(`feature dimension is zero: ${path}`);
  }
  const expect = FEATURE_HEADER_LEN + 4 * n * dim;
  if (buf.length !== expect) {
    throw new Error(`feature file size ${buf.length} != expected ${expect}: ${path}`);
  }
  return { kind, n, dim, values: readFloat32Payload(view, FEATURE_HEADER_LEN, n * dim) };
}

export function writeGridFile(path: string, grid: FeatureGrid): void {
  if (grid.dim <= 0) {
    throw new Error('grid dimension must be positive');
  }
  if (!(grid.scale > 0) || !Number.isFinite(grid.scale)) {
    throw new Error('grid scale must be positive');
  }
  if (grid.values.length !== grid.rows * grid.cols * grid.dim) {
    throw new Error(`grid payload length ${grid.values.length} != rows * cols * dim`);
  }
  const buf = Buffer.alloc(GRID_HEADER_LEN + 4 * grid.values.length);
  buf.write(GRID_MAGIC, 0, 'ascii');
  const view = viewOf(buf);
  view.setUint32(4, FORMAT_VERSION, true);
  view.setUint32(8, grid.rows, true);
  view.setUint32(12, grid.cols, true);
  view.setUint32(16, grid.dim, true);
  view.setFloat32(20, grid.scale, true);
  writeFloat32Payload(view, GRID_HEADER_LEN, grid.values);
  writeFileSync(path, buf);
}

export function readGridFile(path: string): FeatureGrid {
  const buf = readFileSync(path);
  if (buf.length < GRID_HEADER_LEN) {
    throw new Error(`grid file truncated header: ${path}`);
  }
  if (buf.toString('ascii', 0, 4) !== GRID_MAGIC) {
    throw new Error(`bad grid file magic: ${path}`);
  }
  const view = viewOf(buf);
  const version = view.getUint32(4, true);
  if (version !== FORMAT_VERSION) {
    throw new Error(`unsupported grid file version ${version}: ${path}`);
  }
  const rows = view.getUint32(8, true);
  const cols = view.getUint32(12, true);
  const dim = view.getUint32(16, true);
  const scale = view.getFloat32(20, true);
  if (dim === 0) {
    throw new Error(`grid dimension is zero: ${path}`);
  }
  const expect = GRID_HEADER_LEN + 4 * rows * cols * dim;
  if (buf.length !== expect) {
    throw new Error(`grid file size ${buf.length} != expected ${expect}: ${path}`);
  }
  if (!(scale > 0) || !Number.isFinite(scale)) {
    throw new Error(`grid scale must be positive: ${path}`);
  }
  return { rows, cols, dim, scale, values: readFloat32Payload(view, GRID_HEADER_LEN, rows * cols * dim) };
}
