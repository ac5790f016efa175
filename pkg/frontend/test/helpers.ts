/** Fixture builders: a real PNG encoder (all five filters, RGB/gray) and a
 * tiny MVTec-style tree writer. */

import * as fs from 'fs';
import * as path from 'path';
import * as zlib from 'zlib';

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(buf: Buffer): number {
  let c = 0xffffffff;
  for (const b of buf) c = CRC_TABLE[(c ^ b) & 0xff] ^ (c >>> 8);
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, body: Buffer): Buffer {
  const head = Buffer.alloc(8);
  head.writeUInt32BE(body.length, 0);
  head.write(type, 4, 'latin1');
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(Buffer.concat([head.subarray(4), body])), 0);
  return Buffer.concat([head, body, crc]);
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

export interface PngOptions {
  colorType?: 0 | 2; // gray | RGB
  filter?: 0 | 1 | 2 | 3 | 4;
}

/** Encode 8-bit PNG from row-major RGB bytes (gray takes the R channel). */
export function encodePng(
  width: number,
  height: number,
  rgb: Uint8Array,
  opts: PngOptions = {},
): Buffer {
  const colorType = opts.colorType ?? 2;
  const filter = opts.filter ?? 0;
  const channels = colorType === 2 ? 3 : 1;
  const stride = width * channels;
  const raw = Buffer.alloc((stride + 1) * height);
  const sample = (x: number, y: number, c: number) =>
    colorType === 2 ? rgb[(y * width + x) * 3 + c] : rgb[(y * width + x) * 3];
  for (let y = 0; y < height; y++) {
    raw[y * (stride + 1)] = filter;
    for (let x = 0; x < stride; x++) {
      const px = Math.floor(x / channels);
      const ch = x % channels;
      const cur = sample(px, y, ch);
      const left = x >= channels ? sample(Math.floor((x - channels) / channels), y, ch) : 0;
      const up = y > 0 ? sample(px, y - 1, ch) : 0;
      const upLeft = y > 0 && x >= channels ? sample(px - 1, y - 1, ch) : 0;
      let value: number;
      switch (filter) {
        case 0: value = cur; break;
        case 1: value = cur - left; break;
        case 2: value = cur - up; break;
        case 3: value = cur - ((left + up) >> 1); break;
        default: value = cur - paeth(left, up, upLeft); break;
      }
      raw[y * (stride + 1) + 1 + x] = value & 0xff;
    }
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8;
  ihdr[9] = colorType;
  const sig = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);
  return Buffer.concat([
    sig,
    chunk('IHDR', ihdr),
    chunk('IDAT', zlib.deflateSync(raw)),
    chunk('IEND', Buffer.alloc(0)),
  ]);
}

export function solidImage(width: number, height: number, rgb: [number, number, number]): Uint8Array {
  const out = new Uint8Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    out[i * 3] = rgb[0];
    out[i * 3 + 1] = rgb[1];
    out[i * 3 + 2] = rgb[2];
  }
  return out;
}

export function gradientImage(width: number, height: number): Uint8Array {
  const out = new Uint8Array(width * height * 3);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = (y * width + x) * 3;
      out[i] = (x * 7 + y * 3) & 0xff;
      out[i + 1] = (x * 13 + y * 5) & 0xff;
      out[i + 2] = (x * 3 + y * 11) & 0xff;
    }
  }
  return out;
}

/** MVTec-style tree: train/good, test/good, test/<defect> + ground truth. */
export function writeDatasetTree(root: string, category: string, size: number): void {
  const cat = path.join(root, category);
  const dirs = [
    path.join(cat, 'train', 'good'),
    path.join(cat, 'test', 'good'),
    path.join(cat, 'test', 'scratch'),
    path.join(cat, 'ground_truth', 'scratch'),
  ];
  for (const d of dirs) fs.mkdirSync(d, { recursive: true });

  for (let i = 0; i < 3; i++) {
    fs.writeFileSync(
      path.join(cat, 'train', 'good', `00${i}.png`),
      encodePng(size, size, gradientImage(size, size)),
    );
  }
  fs.writeFileSync(
    path.join(cat, 'test', 'good', '000.png'),
    encodePng(size, size, gradientImage(size, size)),
  );
  // defect image plus its binary mask
  const defect = gradientImage(size, size);
  for (let y = 0; y < size / 4; y++) {
    for (let x = 0; x < size / 4; x++) {
      defect[(y * size + x) * 3] = 255;
    }
  }
  fs.writeFileSync(path.join(cat, 'test', 'scratch', '000.png'), encodePng(size, size, defect));
  const mask = new Uint8Array(size * size * 3);
  for (let y = 0; y < size / 4; y++) {
    for (let x = 0; x < size / 4; x++) {
      mask[(y * size + x) * 3] = 255;
      mask[(y * size + x) * 3 + 1] = 255;
      mask[(y * size + x) * 3 + 2] = 255;
    }
  }
  fs.writeFileSync(
    path.join(cat, 'ground_truth', 'scratch', '000_mask.png'),
    encodePng(size, size, mask, { colorType: 0 }),
  );
}
