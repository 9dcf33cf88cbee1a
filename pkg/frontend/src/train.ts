/**
 * Desk-scale training for the residual denoiser.
 *
 * Overlapping patches are cropped at random from a directory of grayscale
 * images, corrupted with fresh additive white Gaussian noise each epoch at
 * the target sigma, and the network is fit with Adam on the MSE of the
 * predicted residual. The learning rate starts at 1e-3 and drops to 1e-4
 * and then 1e-5 when the validation loss stops improving.
 */
import * as tf from '@tensorflow/tfjs';
import * as fs from 'fs';
import * as path from 'path';

import {initBackend} from './backend';
import {ResidualDenoiser, saveCheckpoint} from './model';
import {GrayImage, readPgm} from './pgm';
import {fillGaussian, makeRng} from './rng';

export interface TrainOptions {
  dataDir: string;
  sigma: number;
  outFile: string;
  depth: number;
  channels: number;
  patchSize: number;
  patches: number;
  batchSize: number;
  epochs: number;
  valFraction: number;
  plateauPatience: number;
  seed: number;
  quiet?: boolean;
}

export const TRAIN_DEFAULTS = {
  depth: 7,
  channels: 24,
  patchSize: 32,
  patches: 2048,
  batchSize: 32,
  epochs: 5,
  valFraction: 0.1,
  plateauPatience: 2,
  seed: 1,
};

export function loadImageDir(dir: string): GrayImage[] {
  const files = fs.readdirSync(dir).filter((f) => f.toLowerCase().endsWith('.pgm')).sort();
  if (files.length === 0) throw new Error(`no .pgm images in ${dir}`);
  return files.map((f) => readPgm(path.join(dir, f)));
}

export function cropPatches(images: GrayImage[], patchSize: number, count: number,
                            rng: () => number): Float32Array {
  const usable = images.filter((im) => im.height >= patchSize && im.width >= patchSize);
  if (usable.length === 0) throw new Error(`no images of at least ${patchSize}px`);
  const out = new Float32Array(count * patchSize * patchSize);
  for (let p = 0; p < count; p++) {
    const im = usable[Math.floor(rng() * usable.length)];
    const r0 = Math.floor(rng() * (im.height - patchSize + 1));
    const c0 = Math.floor(rng() * (im.width - patchSize + 1));
    const base = p * patchSize * patchSize;
    for (let r = 0; r < patchSize; r++) {
      const src = (r0 + r) * im.width + c0;
      out.set(im.data.subarray(src, src + patchSize), base + r * patchSize);
    }
  }
  return out;
}

function shuffled(n: number, rng: () => number): Int32Array {
  const idx = new Int32Array(n);
  for (let i = 0; i < n; i++) idx[i] = i;
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(rng() * (i + 1));
    const t = idx[i];
    idx[i] = idx[j];
    idx[j] = t;
  }
  return idx;
}

export async function train(opts: TrainOptions): Promise<{model: ResidualDenoiser;
                                                          history: number[]}> {
  await initBackend();
  const log = (msg: string) => {
    if (!opts.quiet) process.stderr.write(msg + '\n');
  };
  const images = loadImageDir(opts.dataDir);
  if (images.length < 10) {
    throw new Error(`need at least 10 training images, found ${images.length}`);
  }
  const rng = makeRng(opts.seed);
  const ps = opts.patchSize;
  const pixelsPerPatch = ps * ps;
  const clean = cropPatches(images, ps, opts.patches, rng);
  const nVal = Math.max(1, Math.round(opts.patches * opts.valFraction));
  const nTrain = opts.patches - nVal;

  const model = ResidualDenoiser.build(
    {depth: opts.depth, channels: opts.channels, sigma: opts.sigma}, opts.seed);
  const vars = model.trainables();

  // fixed validation split with one fixed noise draw
  const valNoise = new Float32Array(nVal * pixelsPerPatch);
  fillGaussian(valNoise, makeRng(opts.seed + 999), opts.sigma);
  const valClean = clean.subarray(nTrain * pixelsPerPatch);
  const valNoisy = new Float32Array(valClean.length);
  for (let i = 0; i < valClean.length; i++) valNoisy[i] = valClean[i] + valNoise[i];
  const valX = tf.tensor4d(valNoisy, [nVal, ps, ps, 1]);
  const valY = tf.tensor4d(valNoise, [nVal, ps, ps, 1]);

  const valLoss = (): number => tf.tidy(() => {
    const pred = model.forward(valX as tf.Tensor4D, false);
    return tf.mean(tf.square(tf.sub(pred, valY))).dataSync()[0];
  });

  let lr = 1e-3;
  let optimizer = tf.train.adam(lr);
  const history: number[] = [];
  let bestVal = Infinity;
  let sinceBest = 0;
  let drops = 0;

  const noise = new Float32Array(nTrain * pixelsPerPatch);
  const noisy = new Float32Array(nTrain * pixelsPerPatch);
  const batchX = new Float32Array(opts.batchSize * pixelsPerPatch);
  const batchY = new Float32Array(opts.batchSize * pixelsPerPatch);

  for (let epoch = 0; epoch < opts.epochs; epoch++) {
    fillGaussian(noise, makeRng(opts.seed + 17 * (epoch + 1)), opts.sigma);
    for (let i = 0; i < noise.length; i++) noisy[i] = clean[i] + noise[i];
    const order = shuffled(nTrain, rng);
    let epochLoss = 0;
    let steps = 0;
    for (let start = 0; start + opts.batchSize <= nTrain; start += opts.batchSize) {
      for (let b = 0; b < opts.batchSize; b++) {
        const src = order[start + b] * pixelsPerPatch;
        batchX.set(noisy.subarray(src, src + pixelsPerPatch), b * pixelsPerPatch);
        batchY.set(noise.subarray(src, src + pixelsPerPatch), b * pixelsPerPatch);
      }
      const x = tf.tensor4d(batchX, [opts.batchSize, ps, ps, 1]);
      const y = tf.tensor4d(batchY, [opts.batchSize, ps, ps, 1]);
      const loss = optimizer.minimize(
        () => tf.mean(tf.square(tf.sub(model.forward(x, true), y))) as tf.Scalar,
        true, vars);
      epochLoss += loss!.dataSync()[0];
      loss!.dispose();
      x.dispose();
      y.dispose();
      steps += 1;
    }
    const trainLoss = epochLoss / Math.max(steps, 1);
    const vLoss = valLoss();
    history.push(trainLoss);
    log(`epoch ${epoch + 1}/${opts.epochs} lr=${lr} train=${trainLoss.toFixed(3)} ` +
        `val=${vLoss.toFixed(3)}`);
    if (vLoss < bestVal * 0.995) {
      bestVal = vLoss;
      sinceBest = 0;
    } else {
      sinceBest += 1;
      if (sinceBest >= opts.plateauPatience && drops < 2) {
        lr /= 10;
        drops += 1;
        sinceBest = 0;
        optimizer.dispose();
        optimizer = tf.train.adam(lr);
        log(`validation plateau: dropping learning rate to ${lr}`);
      }
    }
  }
  valX.dispose();
  valY.dispose();
  optimizer.dispose();
  await saveCheckpoint(model, opts.outFile);
  log(`saved checkpoint to ${opts.outFile}`);
  return {model, history};
}
