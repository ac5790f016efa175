/**
 * Dataset manifest emission — the JSON schema the engine loads:
 *
 *   {"split": "train"|"test",
 *    "layers": [2, 3],
 *    "entries": [{"image_id", "tensors": {"<layer>": path}, "label", "mask"}]}
 *
 * Paths are written relative to the manifest's directory, keys sorted for
 * byte-stable output.
 */

import * as fs from 'fs';
import * as path from 'path';

export interface ManifestEntry {
  image_id: string;
  tensors: Record<string, string>;
  label: 'normal' | 'anomalous' | null;
  mask: string | null;
}

export interface Manifest {
  split: 'train' | 'test';
  layers: number[];
  entries: ManifestEntry[];
}

function sortKeys(value: unknown): unknown {
  if (Array.isArray(value)) return value.map(sortKeys);
  if (value !== null && typeof value === 'object') {
    const out: Record<string, unknown> = {};
    for (const k of Object.keys(value as Record<string, unknown>).sort()) {
      out[k] = sortKeys((value as Record<string, unknown>)[k]);
    }
    return out;
  }
  return value;
}

export function writeManifest(manifest: Manifest, file: string): void {
  fs.writeFileSync(file, JSON.stringify(sortKeys(manifest), null, 2) + '\n');
}

export function relativeTo(manifestDir: string, target: string): string {
  return path.relative(manifestDir, target).split(path.sep).join('/');
}
