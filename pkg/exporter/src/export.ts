/**
 * Export jobs: turn raw scans into per-scan feature banks and feature grids
 * laid out exactly as the consuming pipeline reads them.
 */
import { readdirSync, mkdirSync } from 'fs';
import { basename, join } from 'path';
import { readScanFile, writeFeatureFile, writeGridFile, Scan } from './formats';
import {
  getModel,
  imageGridValues,
  ModelConfig,
  pointEmbeddings,
  RangeImage,
  renderRangeImage,
} from './model';

export interface ExportJob {
  /** Directory holding raw .bin scans. */
  inputDir: string;
  modelName: string;
  /** Which layer of the extractor to read features from. */
  layer: number;
  outDir: string;
  /** Pixels per grid cell; defaults to the model's native patch scale. */
  patchScale?: number;
}

export interface ExportSummary {
  scans: number;
  bankFiles: string[];
  gridFiles: string[];
}

export interface NamedScan {
  stem: string;
  scan: Scan;
}

export interface NamedImage {
  stem: string;
  image: RangeImage;
}

/** Sorted .bin scan paths under a directory. */
export function listScanFiles(inputDir: string): string[] {
  const names = readdirSync(inputDir)
    .filter((name) => name.endsWith('.bin'))
    .sort();
  return names.map((name) => join(inputDir, name));
}

function stemOf(path: string): string {
  const name = basename(path);
  return name.slice(0, name.length - '.bin'.length);
}

export function loadScans(scanPaths: string[]): NamedScan[] {
  return scanPaths.map((path) => ({ stem: stemOf(path), scan: readScanFile(path) }));
}

/**
 * Write one point feature bank per scan. Row i of a bank embeds point i of
 * its scan, so scan order is preserved; an empty scan yields a header-only
 * file. Returns the written paths.
 */
export function exportPointFeatures(
  scans: NamedScan[],
  model: ModelConfig,
  layer: number,
  outDir: string,
): string[] {
  const written: string[] = [];
  for (const { stem, scan } of scans) {
    const values = pointEmbeddings(scan, model, layer);
    const path = join(outDir, `${stem}.aifb`);
    writeFeatureFile(path, { kind: 'P', n: scan.n, dim: model.pointDim, values });
    written.push(path);
  }
  return written;
}

/** Write one feature grid per image. Returns the written paths. */
export function exportImageGrids(
  images: NamedImage[],
  model: ModelConfig,
  layer: number,
  patchScale: number,
  outDir: string,
): string[] {
  const written: string[] = [];
  for (const { stem, image } of images) {
    const grid = imageGridValues(image, model, layer, patchScale);
    const path = join(outDir, `${stem}.grid`);
    writeGridFile(path, { ...grid, scale: patchScale });
    written.push(path);
  }
  return written;
}

/**
 * Run a full export: every scan gets a feature bank, and a range-image view
 * of every scan gets a feature grid.
 */
export function runExportJob(job: ExportJob): ExportSummary {
  const model = getModel(job.modelName);
  const patchScale = job.patchScale ?? model.patchScale;
  mkdirSync(job.outDir, { recursive: true });
  const scans = loadScans(listScanFiles(job.inputDir));
  const images: NamedImage[] = scans.map(({ stem, scan }) => ({
    stem,
    image: renderRangeImage(scan, model.imageRows, model.imageCols),
  }));
  const bankFiles = exportPointFeatures(scans, model, job.layer, job.outDir);
  const gridFiles = exportImageGrids(images, model, job.layer, patchScale, job.outDir);
  return { scans: scans.length, bankFiles, gridFiles };
}
