/**
 * PRDN1 protocol server: binary frames over stdin/stdout, little-endian.
 *
 *   handshake  ->  "PRDN" + u8 version (= 1)
 *   request    <-  u32 height, u32 width, f32 sigma, h*w f32 pixels
 *   response   ->  u8 0 + h*w f32 pixels    on success
 *                  u8 1 + u32 len + UTF-8   on a per-request error
 *
 * The parent closing stdin ends the loop; the process exits 0. Request
 * errors (non-finite pixels, oversized frames, model failures) produce an
 * error frame and the loop continues.
 */
import * as tf from '@tensorflow/tfjs';
import * as fs from 'fs';
import * as path from 'path';

import {initBackend} from './backend';
import {denoise, loadCheckpoint, ResidualDenoiser} from './model';

export const PROTOCOL_MAGIC = 'PRDN';
export const PROTOCOL_VERSION = 1;
const MAX_PIXELS = 64 * 1024 * 1024;

class StreamReader {
  private chunks: Buffer[] = [];
  private size = 0;
  private ended = false;
  private pending: {n: number; resolve: (b: Buffer | null) => void} | null = null;

  constructor(stream: NodeJS.ReadableStream) {
    stream.on('data', (chunk: Buffer) => {
      this.chunks.push(chunk);
      this.size += chunk.length;
      this.drain();
    });
    stream.on('end', () => {
      this.ended = true;
      this.drain();
    });
    stream.on('error', () => {
      this.ended = true;
      this.drain();
    });
  }

  private drain(): void {
    if (this.pending === null) return;
    if (this.size >= this.pending.n) {
      const want = this.pending.n;
      const buf = Buffer.concat(this.chunks, this.size);
      this.chunks = buf.length > want ? [buf.subarray(want)] : [];
      this.size = buf.length - want;
      const out = buf.subarray(0, want);
      const resolve = this.pending.resolve;
      this.pending = null;
      resolve(out);
    } else if (this.ended) {
      const resolve = this.pending.resolve;
      this.pending = null;
      resolve(null);
    }
  }

  /** Resolve with exactly n bytes, or null if the stream ended first. */
  readExact(n: number): Promise<Buffer | null> {
    if (this.pending !== null) throw new Error('concurrent read');
    return new Promise((resolve) => {
      this.pending = {n, resolve};
      this.drain();
    });
  }
}

interface Bank {
  entries: {sigma: number; model: ResidualDenoiser}[];
}

export async function loadBank(dir: string): Promise<Bank> {
  const files = fs.readdirSync(dir).filter((f) => f.endsWith('.json')).sort();
  if (files.length === 0) throw new Error(`no checkpoints (*.json) in ${dir}`);
  const entries = [];
  for (const f of files) {
    const {model, spec} = await loadCheckpoint(path.join(dir, f));
    entries.push({sigma: spec.sigma, model});
  }
  entries.sort((a, b) => b.sigma - a.sigma);
  return {entries};
}

/** The checkpoint whose training sigma is nearest the request sigma. */
export function pickNearest(bank: Bank, sigma: number): {sigma: number; model: ResidualDenoiser} {
  let best = bank.entries[0];
  for (const e of bank.entries) {
    if (Math.abs(e.sigma - sigma) < Math.abs(best.sigma - sigma)) best = e;
  }
  return best;
}

function errorFrame(message: string): Buffer {
  const msg = Buffer.from(message, 'utf-8');
  const head = Buffer.alloc(5);
  head.writeUInt8(1, 0);
  head.writeUInt32LE(msg.length, 1);
  return Buffer.concat([head, msg]);
}

function write(out: NodeJS.WritableStream, buf: Buffer): Promise<void> {
  return new Promise((resolve, reject) => {
    out.write(buf, (err) => (err ? reject(err) : resolve()));
  });
}

export async function serve(checkpointsDir: string,
                            stdin: NodeJS.ReadableStream = process.stdin,
                            stdout: NodeJS.WritableStream = process.stdout): Promise<void> {
  await initBackend();
  const bank = await loadBank(checkpointsDir);
  const reader = new StreamReader(stdin);

  const hello = Buffer.alloc(5);
  hello.write(PROTOCOL_MAGIC, 0, 'ascii');
  hello.writeUInt8(PROTOCOL_VERSION, 4);
  await write(stdout, hello);

  for (;;) {
    const header = await reader.readExact(12);
    if (header === null) return; // parent closed stdin: clean shutdown
    const height = header.readUInt32LE(0);
    const width = header.readUInt32LE(4);
    const sigma = header.readFloatLE(8);
    if (height === 0 || width === 0 || height * width > MAX_PIXELS) {
      await write(stdout, errorFrame(`invalid frame dimensions ${height}x${width}`));
      continue;
    }
    const payload = await reader.readExact(4 * height * width);
    if (payload === null) return;
    try {
      const aligned = new ArrayBuffer(payload.length);
      Buffer.from(aligned).set(payload);
      const pixels = new Float32Array(aligned);
      let finite = true;
      for (let i = 0; i < pixels.length; i++) {
        if (!Number.isFinite(pixels[i])) { finite = false; break; }
      }
      if (!finite) throw new Error('request contains non-finite pixels');
      if (!Number.isFinite(sigma) || sigma < 0) throw new Error(`invalid sigma ${sigma}`);
      const chosen = pickNearest(bank, sigma);
      const img = tf.tensor2d(pixels, [height, width]);
      const out = denoise(chosen.model, img);
      img.dispose();
      const data = (await out.data()) as Float32Array;
      out.dispose();
      const frame = Buffer.alloc(1 + 4 * data.length);
      frame.writeUInt8(0, 0);
      Buffer.from(data.buffer, data.byteOffset, 4 * data.length).copy(frame, 1);
      await write(stdout, frame);
    } catch (err) {
      await write(stdout, errorFrame(err instanceof Error ? err.message : String(err)));
    }
  }
}
