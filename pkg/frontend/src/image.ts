/**
 * Image decoding and the preprocessing pipeline.
 *
 * Decodes 8-bit PNG (gray, gray+alpha, RGB, RGBA, palette; non-interlaced)
 * via node's zlib, plus binary PPM (P6) for fixtures. Preprocessing
 * matches the training-time convention of the backbone family: bilinear
 * resize of the shorter side, center crop, scale to [0,1], per-channel
 * ImageNet normalization.
 */

import * as fs from 'fs';
import * as zlib from 'zlib';

export interface RgbImage {
  width: number;
  height: number;
  /** row-major RGB, 3 bytes per pixel */
  pixels: Uint8Array;
}

export const IMAGENET_MEAN = [0.485, 0.456, 0.406] as const;
export const IMAGENET_STD = [0.229, 0.224, 0.225] as const;

// --- PNG ---------------------------------------------------------------

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

export function decodePng(buf: Buffer): RgbImage {
  const sig = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);
  if (buf.length < 8 || !buf.subarray(0, 8).equals(sig)) {
    throw new Error('not a PNG file');
  }
  let pos = 8;
  let width = 0;
  let height = 0;
  let bitDepth = 0;
  let colorType = 0;
  let palette: Uint8Array | null = null;
  const idat: Buffer[] = [];
  while (pos + 8 <= buf.length) {
    const len = buf.readUInt32BE(pos);
    const type = buf.subarray(pos + 4, pos + 8).toString('latin1');
    const body = buf.subarray(pos + 8, pos + 8 + len);
    pos += 12 + len;
    if (type === 'IHDR') {
      width = body.readUInt32BE(0);
      height = body.readUInt32BE(4);
      bitDepth = body[8];
      colorType = body[9];
      if (body[12] !== 0) throw new Error('interlaced PNG not supported');
      if (bitDepth !== 8) throw new Error(`bit depth ${bitDepth} not supported`);
    } else if (type === 'PLTE') {
      palette = new Uint8Array(body);
    } else if (type === 'IDAT') {
      idat.push(Buffer.from(body));
    } else if (type === 'IEND') {
      break;
    }
  }
  if (width === 0 || height === 0) throw new Error('missing IHDR');
  const channels = { 0: 1, 2: 3, 3: 1, 4: 2, 6: 4 }[colorType];
  if (channels === undefined) throw new Error(`color type ${colorType} not supported`);
  if (colorType === 3 && palette === null) throw new Error('palette image without PLTE');

  const raw = zlib.inflateSync(Buffer.concat(idat));
  const stride = width * channels;
  if (raw.length !== (stride + 1) * height) throw new Error('corrupt PNG payload');

  const recon = new Uint8Array(stride * height);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const row = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const out = y * stride;
    const prev = (y - 1) * stride;
    for (let x = 0; x < stride; x++) {
      const rawByte = row[x];
      const left = x >= channels ? recon[out + x - channels] : 0;
      const up = y > 0 ? recon[prev + x] : 0;
      const upLeft = y > 0 && x >= channels ? recon[prev + x - channels] : 0;
      let value: number;
      switch (filter) {
        case 0: value = rawByte; break;
        case 1: value = rawByte + left; break;
        case 2: value = rawByte + up; break;
        case 3: value = rawByte + ((left + up) >> 1); break;
        case 4: value = rawByte + paeth(left, up, upLeft); break;
        default: throw new Error(`unknown PNG filter ${filter}`);
      }
      recon[out + x] = value & 0xff;
    }
  }

  const pixels = new Uint8Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    const src = i * channels;
    let r: number, g: number, b: number;
    if (colorType === 2 || colorType === 6) {
      r = recon[src]; g = recon[src + 1]; b = recon[src + 2];
    } else if (colorType === 3) {
      const p = recon[src] * 3;
      r = palette![p]; g = palette![p + 1]; b = palette![p + 2];
    } else {
      r = g = b = recon[src];
    }
    pixels[i * 3] = r;
    pixels[i * 3 + 1] = g;
    pixels[i * 3 + 2] = b;
  }
  return { width, height, pixels };
}

// --- PPM (P6), handy for fixtures ---------------------------------------

export function decodePpm(buf: Buffer): RgbImage {
  const text = buf.subarray(0, 64).toString('latin1');
  const m = /^P6\s+(\d+)\s+(\d+)\s+255\s/.exec(text);
  if (!m) throw new Error('not a binary P6 PPM with maxval 255');
  const width = Number(m[1]);
  const height = Number(m[2]);
  const offset = m[0].length;
  const pixels = new Uint8Array(buf.subarray(offset, offset + width * height * 3));
  if (pixels.length !== width * height * 3) throw new Error('truncated PPM');
  return { width, height, pixels };
}

export function readImage(path: string): RgbImage {
  const buf = fs.readFileSync(path);
  if (buf.length >= 2 && buf[0] === 0x50 && buf[1] === 0x36) return decodePpm(buf);
  return decodePng(buf);
}

// --- geometry ------------------------------------------------------------

/** Bilinear resize so the shorter side equals `target` (aspect preserved). */
export function resizeShorter(img: RgbImage, target: number): RgbImage {
  const scale = target / Math.min(img.width, img.height);
  const outW = Math.round(img.width * scale);
  const outH = Math.round(img.height * scale);
  if (outW === img.width && outH === img.height) return img;
  const out = new Uint8Array(outW * outH * 3);
  for (let y = 0; y < outH; y++) {
    let sy = ((y + 0.5) * img.height) / outH - 0.5;
    sy = Math.min(Math.max(sy, 0), img.height - 1);
    const y0 = Math.floor(sy);
    const y1 = Math.min(y0 + 1, img.height - 1);
    const fy = sy - y0;
    for (let x = 0; x < outW; x++) {
      let sx = ((x + 0.5) * img.width) / outW - 0.5;
      sx = Math.min(Math.max(sx, 0), img.width - 1);
      const x0 = Math.floor(sx);
      const x1 = Math.min(x0 + 1, img.width - 1);
      const fx = sx - x0;
      for (let c = 0; c < 3; c++) {
        const a = img.pixels[(y0 * img.width + x0) * 3 + c];
        const b = img.pixels[(y0 * img.width + x1) * 3 + c];
        const d = img.pixels[(y1 * img.width + x0) * 3 + c];
        const e = img.pixels[(y1 * img.width + x1) * 3 + c];
        const top = a + (b - a) * fx;
        const bot = d + (e - d) * fx;
        out[(y * outW + x) * 3 + c] = Math.round(top + (bot - top) * fy);
      }
    }
  }
  return { width: outW, height: outH, pixels: out };
}

export function centerCrop(img: RgbImage, size: number): RgbImage {
  if (img.width < size || img.height < size) {
    throw new Error(`image ${img.width}x${img.height} smaller than crop ${size}`);
  }
  const x0 = Math.floor((img.width - size) / 2);
  const y0 = Math.floor((img.height - size) / 2);
  const out = new Uint8Array(size * size * 3);
  for (let y = 0; y < size; y++) {
    const src = ((y0 + y) * img.width + x0) * 3;
    out.set(img.pixels.subarray(src, src + size * 3), y * size * 3);
  }
  return { width: size, height: size, pixels: out };
}

/**
 * Full input pipeline: resize shorter side, center crop, scale to [0,1],
 * ImageNet-normalize. Returns NHWC float32 data for a [1,size,size,3]
 * tensor.
 */
export function preprocess(img: RgbImage, resize: number, crop: number): Float32Array {
  const cropped = centerCrop(resizeShorter(img, resize), crop);
  const out = new Float32Array(crop * crop * 3);
  for (let i = 0; i < crop * crop; i++) {
    for (let c = 0; c < 3; c++) {
      const v = cropped.pixels[i * 3 + c] / 255;
      out[i * 3 + c] = (v - IMAGENET_MEAN[c]) / IMAGENET_STD[c];
    }
  }
  return out;
}

// --- masks ----------------------------------------------------------------

/**
 * Ground-truth masks go through the same geometry as their image (nearest
 * neighbor to stay binary): resize shorter side, center crop. Returns 0/1
 * bytes at crop x crop.
 */
export function transformMask(img: RgbImage, resize: number, crop: number): Uint8Array {
  const scale = resize / Math.min(img.width, img.height);
  const rw = Math.round(img.width * scale);
  const rh = Math.round(img.height * scale);
  const x0 = Math.floor((rw - crop) / 2);
  const y0 = Math.floor((rh - crop) / 2);
  if (x0 < 0 || y0 < 0) throw new Error('mask smaller than crop after resize');
  const out = new Uint8Array(crop * crop);
  for (let y = 0; y < crop; y++) {
    const sy = Math.min(img.height - 1, Math.round(((y0 + y + 0.5) * img.height) / rh - 0.5));
    for (let x = 0; x < crop; x++) {
      const sx = Math.min(img.width - 1, Math.round(((x0 + x + 0.5) * img.width) / rw - 0.5));
      out[y * crop + x] = img.pixels[(sy * img.width + sx) * 3] > 0 ? 1 : 0;
    }
  }
  return out;
}
