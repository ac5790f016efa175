#!/usr/bin/env node
/**
 * feature-export --data DIR --out DIR --category NAME --weights DIR
 *                [--resize 256] [--crop 224] [--seed N]
 *
 * Runs the backbone over every image of one category and writes the
 * tensors, masks, and manifests the detection engine consumes. Without
 * --weights, --seed selects deterministic random weights (shape/format
 * testing only; detection quality needs pretrained weights).
 */

import { exportFeatures } from './export';
import { parameterShapes } from './backbone';
import { loadWeights, randomWeights } from './weights';

function parseArgs(argv: string[]): Map<string, string> {
  const out = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith('--') || i + 1 >= argv.length) {
      throw new Error(`malformed arguments near ${key}`);
    }
    out.set(key.slice(2), argv[i + 1]);
  }
  return out;
}

export function main(argv: string[]): number {
  let args: Map<string, string>;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
  const data = args.get('data');
  const out = args.get('out');
  const category = args.get('category');
  if (!data || !out || !category) {
    console.error('usage: feature-export --data DIR --out DIR --category NAME [--weights DIR]');
    return 2;
  }
  try {
    const weights = args.has('weights')
      ? loadWeights(args.get('weights')!)
      : randomWeights(Number(args.get('seed') ?? '0'), parameterShapes());
    if (!args.has('weights')) {
      console.warn('warning: no --weights given; using seeded random weights');
    }
    const result = exportFeatures(
      {
        dataDir: data,
        outDir: out,
        category,
        resize: args.has('resize') ? Number(args.get('resize')) : undefined,
        crop: args.has('crop') ? Number(args.get('crop')) : undefined,
      },
      weights,
    );
    console.log(
      `exported ${result.exported} images (${result.skipped.length} skipped) -> ${result.trainManifest}`,
    );
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
