/**
 * NPY v1.0 serialization — the engine's on-disk tensor format.
 *
 * Writer emits exactly what the engine ingests: magic \x93NUMPY, version
 * (1, 0), a python-literal header padded to a 64-byte boundary, and a
 * little-endian payload. Feature tensors are `<f4` C-order 3-D, masks
 * `|u1` 2-D. The reader exists for weight files (float32, 1-D to 4-D).
 */

import * as fs from 'fs';

const MAGIC = Buffer.from('\x93NUMPY', 'latin1');

function buildHeader(descr: string, shape: readonly number[]): Buffer {
  const shapeTuple =
    shape.length === 1 ? `(${shape[0]},)` : `(${shape.join(', ')})`;
  let header = `{'descr': '${descr}', 'fortran_order': False, 'shape': ${shapeTuple}, }`;
  const unpadded = 10 + header.length + 1;
  const pad = (64 - (unpadded % 64)) % 64;
  header = header + ' '.repeat(pad) + '\n';
  const out = Buffer.alloc(10 + header.length);
  MAGIC.copy(out, 0);
  out[6] = 1;
  out[7] = 0;
  out.writeUInt16LE(header.length, 8);
  out.write(header, 10, 'latin1');
  return out;
}

export function encodeFloat32(data: Float32Array, shape: readonly number[]): Buffer {
  const count = shape.reduce((a, b) => a * b, 1);
  if (count !== data.length) {
    throw new Error(`shape [${shape}] does not match ${data.length} elements`);
  }
  for (const v of data) {
    if (!Number.isFinite(v)) throw new Error('tensor contains NaN or Inf');
  }
  const payload = Buffer.from(data.buffer, data.byteOffset, data.byteLength);
  return Buffer.concat([buildHeader('<f4', shape), payload]);
}

export function encodeUint8(data: Uint8Array, shape: readonly number[]): Buffer {
  const count = shape.reduce((a, b) => a * b, 1);
  if (count !== data.length) {
    throw new Error(`shape [${shape}] does not match ${data.length} elements`);
  }
  return Buffer.concat([buildHeader('|u1', shape), Buffer.from(data)]);
}

export function writeFloat32(path: string, data: Float32Array, shape: readonly number[]): void {
  fs.writeFileSync(path, encodeFloat32(data, shape));
}

export function writeMask(path: string, data: Uint8Array, shape: readonly number[]): void {
  fs.writeFileSync(path, encodeUint8(data, shape));
}

export interface NpyArray {
  shape: number[];
  data: Float32Array;
}

/** Parse a float32 NPY v1.0 buffer (used for weight files). */
export function decodeFloat32(buf: Buffer): NpyArray {
  if (buf.length < 10 || !buf.subarray(0, 6).equals(MAGIC)) {
    throw new Error('not an NPY file');
  }
  if (buf[6] !== 1 || buf[7] !== 0) {
    throw new Error(`unsupported NPY version ${buf[6]}.${buf[7]}`);
  }
  const headerLen = buf.readUInt16LE(8);
  const header = buf.subarray(10, 10 + headerLen).toString('latin1');
  const descr = /'descr':\s*'([^']+)'/.exec(header)?.[1];
  const fortran = /'fortran_order':\s*(True|False)/.exec(header)?.[1];
  const shapeText = /'shape':\s*\(([^)]*)\)/.exec(header)?.[1];
  if (descr !== '<f4') throw new Error(`expected <f4 data, got ${descr}`);
  if (fortran !== 'False') throw new Error('fortran_order must be False');
  if (shapeText === undefined) throw new Error('malformed header: missing shape');
  const shape = shapeText
    .split(',')
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map((s) => Number.parseInt(s, 10));
  const count = shape.reduce((a, b) => a * b, 1);
  const payload = buf.subarray(10 + headerLen);
  if (payload.length !== count * 4) {
    throw new Error(`payload is ${payload.length} bytes, expected ${count * 4}`);
  }
  // copy to guarantee alignment for the Float32Array view
  const aligned = Buffer.alloc(payload.length);
  payload.copy(aligned);
  return { shape, data: new Float32Array(aligned.buffer, 0, count) };
}

export function readFloat32(path: string): NpyArray {
  return decodeFloat32(fs.readFileSync(path));
}
