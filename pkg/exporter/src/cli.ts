#!/usr/bin/env node
/**
 * Command line entry point.
 *
 * Usage:
 *   node dist/cli.js --input <scan dir> --model <name> --layer <k> --out <dir> [--patch-scale <px>]
 *
 * Exit codes: 0 success, 1 runtime failure, 2 bad usage.
 */
import { ExportJob, runExportJob } from './export';
import { listModelNames } from './model';

const USAGE =
  'usage: cli.js --input <scan dir> --model <name> --layer <k> --out <dir> [--patch-scale <px>]\n' +
  `known models: ${listModelNames().join(', ')}`;

class UsageError extends Error {}

export function parseArgs(argv: string[]): ExportJob {
  const values: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    if (!flag.startsWith('--')) {
      throw new UsageError(`unexpected argument ${flag}`);
    }
    const value = argv[i + 1];
    if (value === undefined) {
      throw new UsageError(`flag ${flag} needs a value`);
    }
    values[flag.slice(2)] = value;
  }
  for (const key of Object.keys(values)) {
    if (!['input', 'model', 'layer', 'out', 'patch-scale'].includes(key)) {
      throw new UsageError(`unknown flag --${key}`);
    }
  }
  for (const key of ['input', 'model', 'layer', 'out']) {
    if (values[key] === undefined) {
      throw new UsageError(`missing required flag --${key}`);
    }
  }
  if (!listModelNames().includes(values.model)) {
    throw new UsageError(`unknown model ${values.model}`);
  }
  const layer = Number(values.layer);
  if (!Number.isInteger(layer) || layer < 0) {
    throw new UsageError(`--layer must be a non-negative integer, got ${values.layer}`);
  }
  const job: ExportJob = {
    inputDir: values.input,
    modelName: values.model,
    layer,
    outDir: values.out,
  };
  if (values['patch-scale'] !== undefined) {
    const patchScale = Number(values['patch-scale']);
    if (!Number.isInteger(patchScale) || patchScale <= 0) {
      throw new UsageError(`--patch-scale must be a positive integer, got ${values['patch-scale']}`);
    }
    job.patchScale = patchScale;
  }
  return job;
}

function main(): void {
  let job: ExportJob;
  try {
    job = parseArgs(process.argv.slice(2));
  } catch (error) {
    console.error(error instanceof Error ? error.message : String(error));
    console.error(USAGE);
    process.exitCode = 2;
    return;
  }
  try {
    const summary = runExportJob(job);
    console.log(
      `exported ${summary.bankFiles.length} feature banks and ` +
        `${summary.gridFiles.length} grids from ${summary.scans} scans to ${job.outDir}`,
    );
  } catch (error) {
    console.error(error instanceof Error ? error.message : String(error));
    process.exitCode = 1;
  }
}

if (require.main === module) {
  main();
}
