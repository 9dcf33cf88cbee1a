/** Minimal binary PGM (P5) reader/writer for 8-bit grayscale images. */
import * as fs from 'fs';

export interface GrayImage {
  height: number;
  width: number;
  /** Row-major pixels on the [0, 255] scale. */
  data: Float32Array;
}

export function readPgm(filePath: string): GrayImage {
  const raw = fs.readFileSync(filePath);
  let pos = 0;
  const readToken = (): string => {
    // skip whitespace and '#' comments
    for (;;) {
      while (pos < raw.length && /\s/.test(String.fromCharCode(raw[pos]))) pos++;
      if (pos < raw.length && raw[pos] === 0x23) {
        while (pos < raw.length && raw[pos] !== 0x0a) pos++;
      } else {
        break;
      }
    }
    const start = pos;
    while (pos < raw.length && !/\s/.test(String.fromCharCode(raw[pos]))) pos++;
    return raw.toString('ascii', start, pos);
  };
  const magic = readToken();
  if (magic !== 'P5') throw new Error(`${filePath}: not a binary PGM (magic ${magic})`);
  const width = parseInt(readToken(), 10);
  const height = parseInt(readToken(), 10);
  const maxval = parseInt(readToken(), 10);
  if (!(width > 0 && height > 0)) throw new Error(`${filePath}: bad dimensions`);
  if (maxval > 255) throw new Error(`${filePath}: maxval ${maxval} exceeds 8-bit`);
  pos += 1; // single whitespace after maxval
  const need = width * height;
  if (raw.length - pos < need) throw new Error(`${filePath}: truncated pixel data`);
  const data = new Float32Array(need);
  for (let i = 0; i < need; i++) data[i] = raw[pos + i];
  return {height, width, data};
}

export function writePgm(filePath: string, img: GrayImage): void {
  const header = Buffer.from(`P5\n${img.width} ${img.height}\n255\n`, 'ascii');
  const body = Buffer.alloc(img.width * img.height);
  for (let i = 0; i < body.length; i++) {
    body[i] = Math.max(0, Math.min(255, Math.round(img.data[i])));
  }
  fs.writeFileSync(filePath, Buffer.concat([header, body]));
}
