/**
 * Batch feature export over an image tree in the MVTec layout:
 *
 *   <data>/<category>/train/good/*.png
 *   <data>/<category>/test/<defect-or-good>/*.png
 *   <data>/<category>/ground_truth/<defect>/<stem>_mask.png
 *
 * Every readable image becomes one float32 NPY per tapped stage plus a
 * manifest entry; labels derive from the directory name ("good" is
 * normal); test defects carry their ground-truth mask transformed through
 * the same resize+crop geometry as the image. Unreadable images are
 * skipped with a warning and excluded from the manifest.
 */

import * as fs from 'fs';
import * as path from 'path';

import { Backbone } from './backbone';
import { preprocess, readImage, transformMask } from './image';
import { Manifest, ManifestEntry, relativeTo, writeManifest } from './manifest';
import { writeFloat32, writeMask } from './npy';
import { WeightStore } from './weights';

export interface ExportSpec {
  dataDir: string;
  category: string;
  outDir: string;
  /** shorter-side resize; default 256 */
  resize?: number;
  /** center crop, must be divisible by 32; default 224 */
  crop?: number;
}

export interface ExportResult {
  trainManifest: string;
  testManifest: string;
  exported: number;
  skipped: string[];
}

const LAYERS = [2, 3];

function listImages(dir: string): string[] {
  if (!fs.existsSync(dir)) return [];
  return fs
    .readdirSync(dir)
    .filter((f) => /\.(png|ppm)$/i.test(f))
    .sort()
    .map((f) => path.join(dir, f));
}

function validateSpec(spec: ExportSpec): { resize: number; crop: number } {
  const resize = spec.resize ?? 256;
  const crop = spec.crop ?? 224;
  if (crop % 32 !== 0) {
    throw new Error(`crop size ${crop} must be divisible by 32 (backbone stride)`);
  }
  if (resize < crop) {
    throw new Error(`resize ${resize} must be at least the crop ${crop}`);
  }
  return { resize, crop };
}

export function exportFeatures(spec: ExportSpec, weights: WeightStore): ExportResult {
  const { resize, crop } = validateSpec(spec);
  const categoryDir = path.join(spec.dataDir, spec.category);
  if (!fs.existsSync(categoryDir)) {
    throw new Error(`category directory not found: ${categoryDir}`);
  }
  const outDir = path.join(spec.outDir, spec.category);
  const tensorDir = path.join(outDir, 'tensors');
  const maskDir = path.join(outDir, 'masks');
  fs.mkdirSync(tensorDir, { recursive: true });
  fs.mkdirSync(maskDir, { recursive: true });

  const backbone = new Backbone(weights);
  const skipped: string[] = [];
  let exported = 0;

  const processOne = (
    file: string,
    imageId: string,
    label: 'normal' | 'anomalous',
    maskFile: string | null,
  ): ManifestEntry | null => {
    let input: Float32Array;
    try {
      input = preprocess(readImage(file), resize, crop);
    } catch (err) {
      console.warn(`warning: skipping unreadable image ${file}: ${(err as Error).message}`);
      skipped.push(file);
      return null;
    }
    const features = backbone.run(input, crop);
    const tensors: Record<string, string> = {};
    for (const layer of LAYERS) {
      const shape = features.shapes.get(layer)!;
      const file = path.join(tensorDir, `${imageId}_layer${layer}.npy`);
      writeFloat32(file, features.data.get(layer)!, shape);
      tensors[String(layer)] = relativeTo(outDir, file);
    }
    let mask: string | null = null;
    if (maskFile !== null) {
      if (!fs.existsSync(maskFile)) {
        throw new Error(`anomalous image ${file} has no ground-truth mask at ${maskFile}`);
      }
      const bits = transformMask(readImage(maskFile), resize, crop);
      const out = path.join(maskDir, `${imageId}.npy`);
      writeMask(out, bits, [crop, crop]);
      mask = relativeTo(outDir, out);
    }
    exported += 1;
    return { image_id: imageId, tensors, label, mask };
  };

  try {
    const trainEntries: ManifestEntry[] = [];
    for (const file of listImages(path.join(categoryDir, 'train', 'good'))) {
      const imageId = `train_good_${path.parse(file).name}`;
      const entry = processOne(file, imageId, 'normal', null);
      if (entry) trainEntries.push(entry);
    }

    const testEntries: ManifestEntry[] = [];
    const testDir = path.join(categoryDir, 'test');
    const defectDirs = fs.existsSync(testDir)
      ? fs.readdirSync(testDir).filter((d) => fs.statSync(path.join(testDir, d)).isDirectory()).sort()
      : [];
    for (const defect of defectDirs) {
      for (const file of listImages(path.join(testDir, defect))) {
        const stem = path.parse(file).name;
        const imageId = `test_${defect}_${stem}`;
        const normal = defect === 'good';
        const maskFile = normal
          ? null
          : path.join(categoryDir, 'ground_truth', defect, `${stem}_mask.png`);
        const entry = processOne(file, imageId, normal ? 'normal' : 'anomalous', maskFile);
        if (entry) testEntries.push(entry);
      }
    }

    if (trainEntries.length === 0 && testEntries.length === 0) {
      throw new Error(`no readable images under ${categoryDir}`);
    }

    const trainManifest = path.join(outDir, 'train.json');
    const testManifest = path.join(outDir, 'test.json');
    writeManifest({ split: 'train', layers: LAYERS, entries: trainEntries }, trainManifest);
    writeManifest({ split: 'test', layers: LAYERS, entries: testEntries }, testManifest);
    return { trainManifest, testManifest, exported, skipped };
  } finally {
    backbone.dispose();
  }
}
