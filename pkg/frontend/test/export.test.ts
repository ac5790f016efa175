import assert from 'node:assert/strict';
import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';
import { test } from 'node:test';

import { parameterShapes } from '../src/backbone';
import { exportFeatures } from '../src/export';
import { decodeFloat32 } from '../src/npy';
import { randomWeights } from '../src/weights';
import { writeDatasetTree } from './helpers';

const SIZE = 64; // small but stride-compatible crop for fast tests

function freshTree(): string {
  const root = fs.mkdtempSync(path.join(os.tmpdir(), 'export-'));
  writeDatasetTree(path.join(root, 'data'), 'widget', SIZE);
  return root;
}

function runExport(root: string, outName = 'out') {
  return exportFeatures(
    {
      dataDir: path.join(root, 'data'),
      category: 'widget',
      outDir: path.join(root, outName),
      resize: SIZE,
      crop: SIZE,
    },
    randomWeights(0, parameterShapes()),
  );
}

test('export writes manifests, tensors, and masks in the engine schema', () => {
  const root = freshTree();
  const result = runExport(root);
  assert.equal(result.exported, 5);
  assert.deepEqual(result.skipped, []);

  const train = JSON.parse(fs.readFileSync(result.trainManifest, 'utf8'));
  assert.equal(train.split, 'train');
  assert.deepEqual(train.layers, [2, 3]);
  assert.equal(train.entries.length, 3);
  for (const entry of train.entries) {
    assert.equal(entry.label, 'normal');
    assert.equal(entry.mask, null);
    assert.deepEqual(Object.keys(entry.tensors).sort(), ['2', '3']);
  }

  const testDoc = JSON.parse(fs.readFileSync(result.testManifest, 'utf8'));
  assert.equal(testDoc.split, 'test');
  assert.equal(testDoc.entries.length, 2);
  const byLabel = new Map(testDoc.entries.map((e: any) => [e.label, e]));
  assert.ok(byLabel.has('normal'));
  assert.ok(byLabel.has('anomalous'));
  const anomalous = byLabel.get('anomalous') as any;
  assert.ok(anomalous.mask !== null);

  // tensors parse and carry the declared stage shapes for a 64px crop
  const outDir = path.dirname(result.trainManifest);
  const t2 = decodeFloat32(fs.readFileSync(path.join(outDir, train.entries[0].tensors['2'])));
  const t3 = decodeFloat32(fs.readFileSync(path.join(outDir, train.entries[0].tensors['3'])));
  assert.deepEqual(t2.shape, [512, 8, 8]);
  assert.deepEqual(t3.shape, [1024, 4, 4]);
  for (const v of t2.data.subarray(0, 100)) assert.ok(Number.isFinite(v));

  // the mask is uint8 0/1 at crop resolution, covering the planted square
  const maskBuf = fs.readFileSync(path.join(outDir, anomalous.mask));
  const headerLen = maskBuf.readUInt16LE(8);
  assert.match(maskBuf.subarray(10, 10 + headerLen).toString('latin1'), /'\|u1'/);
  const bits = maskBuf.subarray(10 + headerLen);
  assert.equal(bits.length, SIZE * SIZE);
  let ones = 0;
  for (const b of bits) {
    assert.ok(b === 0 || b === 1);
    ones += b;
  }
  assert.equal(ones, (SIZE / 4) * (SIZE / 4));
});

test('export is deterministic byte for byte', () => {
  const root = freshTree();
  const a = runExport(root, 'out_a');
  const b = runExport(root, 'out_b');
  const walk = (dir: string): string[] =>
    fs
      .readdirSync(dir, { recursive: true, withFileTypes: true })
      .filter((d) => d.isFile())
      .map((d) => path.join(d.parentPath ?? (d as any).path, d.name));
  const relA = walk(path.dirname(a.trainManifest)).sort();
  const relB = walk(path.dirname(b.trainManifest)).sort();
  assert.equal(relA.length, relB.length);
  for (let i = 0; i < relA.length; i++) {
    assert.ok(fs.readFileSync(relA[i]).equals(fs.readFileSync(relB[i])), relA[i]);
  }
});

test('unreadable images are skipped with a warning, not fatal', () => {
  const root = freshTree();
  fs.writeFileSync(
    path.join(root, 'data', 'widget', 'train', 'good', 'corrupt.png'),
    Buffer.from('this is not an image'),
  );
  const result = runExport(root);
  assert.equal(result.skipped.length, 1);
  assert.equal(result.exported, 5);
  const train = JSON.parse(fs.readFileSync(result.trainManifest, 'utf8'));
  assert.equal(train.entries.length, 3); // corrupt file excluded
});

test('anomalous image without a ground-truth mask is fatal', () => {
  const root = freshTree();
  fs.rmSync(path.join(root, 'data', 'widget', 'ground_truth', 'scratch', '000_mask.png'));
  assert.throws(() => runExport(root), /no ground-truth mask/);
});

test('crop size must respect the backbone stride', () => {
  const root = freshTree();
  assert.throws(
    () =>
      exportFeatures(
        {
          dataDir: path.join(root, 'data'),
          category: 'widget',
          outDir: path.join(root, 'out'),
          resize: 70,
          crop: 70,
        },
        randomWeights(0, parameterShapes()),
      ),
    /divisible by 32/,
  );
});

test('missing category directory is fatal', () => {
  const root = freshTree();
  assert.throws(
    () =>
      exportFeatures(
        {
          dataDir: path.join(root, 'data'),
          category: 'gadget',
          outDir: path.join(root, 'out'),
          resize: SIZE,
          crop: SIZE,
        },
        randomWeights(0, parameterShapes()),
      ),
    /not found/,
  );
});
