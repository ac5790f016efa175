/**
 * Backbone weight container.
 *
 * Weights load from a directory of NPY files named by parameter path
 * (`conv1.weight.npy`, `layer2.0.bn3.running_var.npy`, ...), with conv
 * kernels stored (out, in, kh, kw). A checkpoint from the reference
 * implementation converts with one `np.save` per state-dict entry.
 * `randomWeights(seed)` builds the same structure with a deterministic
 * PRNG for offline tests.
 */

import * as fs from 'fs';
import * as path from 'path';

import { readFloat32, NpyArray } from './npy';

export interface WeightStore {
  get(name: string): NpyArray;
  has(name: string): boolean;
}

class DirWeights implements WeightStore {
  private cache = new Map<string, NpyArray>();

  constructor(private dir: string) {
    if (!fs.existsSync(dir)) {
      throw new Error(`weights directory not found: ${dir}`);
    }
  }

  has(name: string): boolean {
    return this.cache.has(name) || fs.existsSync(path.join(this.dir, `${name}.npy`));
  }

  get(name: string): NpyArray {
    let arr = this.cache.get(name);
    if (!arr) {
      const file = path.join(this.dir, `${name}.npy`);
      if (!fs.existsSync(file)) throw new Error(`missing weight tensor ${name}`);
      arr = readFloat32(file);
      this.cache.set(name, arr);
    }
    return arr;
  }
}

export function loadWeights(dir: string): WeightStore {
  return new DirWeights(dir);
}

/** mulberry32: tiny deterministic PRNG, good enough for test weights. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

class RandomWeights implements WeightStore {
  private cache = new Map<string, NpyArray>();

  constructor(
    private seed: number,
    private shapes: Map<string, number[]>,
  ) {}

  has(name: string): boolean {
    return this.shapes.has(name);
  }

  get(name: string): NpyArray {
    let arr = this.cache.get(name);
    if (!arr) {
      const shape = this.shapes.get(name);
      if (!shape) throw new Error(`missing weight tensor ${name}`);
      // one stream per tensor so lookup order cannot matter
      let h = this.seed >>> 0;
      for (const ch of name) h = (Math.imul(h, 31) + ch.charCodeAt(0)) >>> 0;
      const rand = mulberry32(h);
      const count = shape.reduce((a, b) => a * b, 1);
      const data = new Float32Array(count);
      const isVar = name.endsWith('running_var');
      const fanScale = 1 / Math.sqrt(Math.max(1, count / (shape[0] ?? 1)));
      for (let i = 0; i < count; i++) {
        data[i] = isVar ? 0.5 + rand() : (rand() * 2 - 1) * fanScale;
      }
      arr = { shape: [...shape], data };
      this.cache.set(name, arr);
    }
    return arr;
  }
}

export function randomWeights(seed: number, shapes: Map<string, number[]>): WeightStore {
  return new RandomWeights(seed, shapes);
}
