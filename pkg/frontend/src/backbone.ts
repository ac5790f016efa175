/**
 * Wide-ResNet50-2 trunk through its third stage, inference only.
 *
 * Structure: 7x7/2 stem conv + BN + ReLU, 3x3/2 max pool, then bottleneck
 * stages [3, 4, 6] with inner widths doubled relative to the plain
 * ResNet-50 (128/256/512), outputs 256/512/1024 channels. The exporter
 * taps the second and third stages; the fourth is never built. At a
 * 224x224 input the taps are (512, 28, 28) and (1024, 14, 14).
 */

import * as tf from '@tensorflow/tfjs';

import { WeightStore } from './weights';

const EPS = 1e-5;

interface BlockSpec {
  name: string;
  inC: number;
  width: number;
  outC: number;
  stride: number;
}

interface StageSpec {
  name: string;
  blocks: BlockSpec[];
}

function bottleneck(name: string, inC: number, width: number, outC: number, stride: number): BlockSpec {
  return { name, inC, width, outC, stride };
}

function stage(name: string, inC: number, width: number, outC: number, count: number, stride: number): StageSpec {
  const blocks = [bottleneck(`${name}.0`, inC, width, outC, stride)];
  for (let i = 1; i < count; i++) {
    blocks.push(bottleneck(`${name}.${i}`, outC, width, outC, 1));
  }
  return { name, blocks };
}

/** Stage layout of the trunk (stem + three bottleneck stages). */
export const TRUNK: StageSpec[] = [
  stage('layer1', 64, 128, 256, 3, 1),
  stage('layer2', 256, 256, 512, 4, 2),
  stage('layer3', 512, 512, 1024, 6, 2),
];

/** Parameter shapes for every tensor the trunk consumes. */
export function parameterShapes(): Map<string, number[]> {
  const shapes = new Map<string, number[]>();
  const bn = (name: string, c: number) => {
    shapes.set(`${name}.weight`, [c]);
    shapes.set(`${name}.bias`, [c]);
    shapes.set(`${name}.running_mean`, [c]);
    shapes.set(`${name}.running_var`, [c]);
  };
  shapes.set('conv1.weight', [64, 3, 7, 7]);
  bn('bn1', 64);
  for (const st of TRUNK) {
    for (const b of st.blocks) {
      shapes.set(`${b.name}.conv1.weight`, [b.width, b.inC, 1, 1]);
      bn(`${b.name}.bn1`, b.width);
      shapes.set(`${b.name}.conv2.weight`, [b.width, b.width, 3, 3]);
      bn(`${b.name}.bn2`, b.width);
      shapes.set(`${b.name}.conv3.weight`, [b.outC, b.width, 1, 1]);
      bn(`${b.name}.bn3`, b.outC);
      if (b.stride !== 1 || b.inC !== b.outC) {
        shapes.set(`${b.name}.downsample.0.weight`, [b.outC, b.inC, 1, 1]);
        bn(`${b.name}.downsample.1`, b.outC);
      }
    }
  }
  return shapes;
}

export interface StageFeatures {
  /** NCHW float32 data per tapped stage, keyed by stage number (2, 3). */
  shapes: Map<number, [number, number, number]>;
  data: Map<number, Float32Array>;
}

export class Backbone {
  private tensors = new Map<string, tf.Tensor>();

  constructor(private weights: WeightStore) {
    const expected = parameterShapes();
    for (const [name, shape] of expected) {
      const arr = weights.get(name);
      if (arr.shape.join(',') !== shape.join(',')) {
        throw new Error(
          `weight ${name}: shape (${arr.shape}) does not match expected (${shape})`,
        );
      }
    }
  }

  dispose(): void {
    for (const t of this.tensors.values()) t.dispose();
    this.tensors.clear();
  }

  private filter(name: string): tf.Tensor4D {
    let t = this.tensors.get(name);
    if (!t) {
      const arr = this.weights.get(name);
      const [outC, inC, kh, kw] = arr.shape;
      // stored (out, in, kh, kw); tfjs wants (kh, kw, in, out). Cached
      // weights are kept out of any enclosing tidy and freed in dispose().
      t = tf.keep(
        tf.tidy(() => tf.tensor4d(arr.data, [outC, inC, kh, kw]).transpose([2, 3, 1, 0])),
      );
      this.tensors.set(name, t);
    }
    return t as tf.Tensor4D;
  }

  private vec(name: string): tf.Tensor1D {
    let t = this.tensors.get(name);
    if (!t) {
      const arr = this.weights.get(name);
      t = tf.keep(tf.tensor1d(arr.data));
      this.tensors.set(name, t);
    }
    return t as tf.Tensor1D;
  }

  private convBn(
    x: tf.Tensor4D,
    conv: string,
    bn: string,
    stride: number,
    pad: number,
  ): tf.Tensor4D {
    const y = tf.conv2d(x, this.filter(`${conv}.weight`), stride, pad);
    return tf.batchNorm(
      y,
      this.vec(`${bn}.running_mean`),
      this.vec(`${bn}.running_var`),
      this.vec(`${bn}.bias`),
      this.vec(`${bn}.weight`),
      EPS,
    ) as tf.Tensor4D;
  }

  private block(x: tf.Tensor4D, spec: BlockSpec): tf.Tensor4D {
    const main = tf.relu(this.convBn(x, `${spec.name}.conv1`, `${spec.name}.bn1`, 1, 0));
    const mid = tf.relu(
      this.convBn(main as tf.Tensor4D, `${spec.name}.conv2`, `${spec.name}.bn2`, spec.stride, 1),
    );
    const out = this.convBn(mid as tf.Tensor4D, `${spec.name}.conv3`, `${spec.name}.bn3`, 1, 0);
    const shortcut =
      spec.stride !== 1 || spec.inC !== spec.outC
        ? this.convBn(x, `${spec.name}.downsample.0`, `${spec.name}.downsample.1`, spec.stride, 0)
        : x;
    return tf.relu(tf.add(out, shortcut)) as tf.Tensor4D;
  }

  /**
   * Run one preprocessed image (NHWC data, crop x crop x 3) and return the
   * stage-2 and stage-3 activations as NCHW float32 arrays.
   */
  run(input: Float32Array, size: number): StageFeatures {
    if (size % 32 !== 0) {
      throw new Error(`input size ${size} must be divisible by 32`);
    }
    const shapes = new Map<number, [number, number, number]>();
    const data = new Map<number, Float32Array>();
    tf.tidy(() => {
      let x = tf.tensor4d(input, [1, size, size, 3]);
      x = this.convBn(x, 'conv1', 'bn1', 2, 3);
      x = tf.relu(x);
      x = tf.maxPool(x, 3, 2, 1);
      TRUNK.forEach((st, i) => {
        for (const b of st.blocks) x = this.block(x, b);
        if (i >= 1) {
          const nchw = x.transpose([0, 3, 1, 2]);
          const [, c, h, w] = nchw.shape;
          shapes.set(i + 1, [c, h, w]);
          data.set(i + 1, nchw.dataSync() as Float32Array);
        }
      });
    });
    return { shapes, data };
  }
}
