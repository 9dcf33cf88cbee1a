/**
 * Residual convolutional denoiser.
 *
 * The network predicts the noise; the denoised image is input minus the
 * prediction. Architecture: 3x3 stride-1 convolutions throughout with ReLU
 * activations and batch normalization on the hidden layers (batch statistics
 * during training, frozen moving statistics at inference), no downsampling,
 * so the receptive-field radius equals the layer count.
 *
 * The graph is assembled from plain ops (conv2d, moments, relu) rather than
 * the layers API: the wasm backend lacks the fused-conv training kernels the
 * layers API is hard-wired to, while plain conv2d differentiates through the
 * gradient registered in backend.ts.
 */
import * as tf from '@tensorflow/tfjs';
import * as fs from 'fs';
import * as path from 'path';

import {makeRng} from './rng';

export interface ModelSpec {
  depth: number;     // number of 3x3 conv layers (>= 2)
  channels: number;  // feature maps per hidden layer
  sigma: number;     // noise std the checkpoint targets, [0,255] scale
}

const BN_EPS = 1e-3;
const BN_MOMENTUM = 0.99;

interface ConvLayer {
  kernel: tf.Variable;          // [3, 3, cin, cout]
  bias: tf.Variable | null;
  gamma: tf.Variable | null;    // batch-norm scale
  beta: tf.Variable | null;     // batch-norm shift
  movingMean: tf.Variable | null;
  movingVar: tf.Variable | null;
}

function glorotKernel(shape: [number, number, number, number],
                      rng: () => number): tf.Tensor4D {
  const [fh, fw, ci, co] = shape;
  const fanIn = fh * fw * ci;
  const fanOut = fh * fw * co;
  const limit = Math.sqrt(6 / (fanIn + fanOut));
  const data = new Float32Array(fh * fw * ci * co);
  for (let i = 0; i < data.length; i++) data[i] = (2 * rng() - 1) * limit;
  return tf.tensor4d(data, shape);
}

export class ResidualDenoiser {
  constructor(readonly spec: ModelSpec, readonly layers: ConvLayer[]) {}

  static build(spec: ModelSpec, seed = 0): ResidualDenoiser {
    if (spec.depth < 2) throw new Error('depth must be >= 2');
    const rng = makeRng(seed);
    const layers: ConvLayer[] = [];
    for (let i = 0; i < spec.depth; i++) {
      const cin = i === 0 ? 1 : spec.channels;
      const cout = i === spec.depth - 1 ? 1 : spec.channels;
      const hidden = i > 0 && i < spec.depth - 1;
      layers.push({
        kernel: tf.variable(glorotKernel([3, 3, cin, cout], rng)),
        bias: hidden ? null : tf.variable(tf.zeros([cout])),
        gamma: hidden ? tf.variable(tf.ones([cout])) : null,
        beta: hidden ? tf.variable(tf.zeros([cout])) : null,
        movingMean: hidden ? tf.variable(tf.zeros([cout]), false) : null,
        movingVar: hidden ? tf.variable(tf.ones([cout]), false) : null,
      });
    }
    return new ResidualDenoiser({...spec}, layers);
  }

  /** Predicted residual for a [batch, h, w, 1] input. */
  forward(x: tf.Tensor4D, training: boolean): tf.Tensor4D {
    let h: tf.Tensor4D = x;
    for (let i = 0; i < this.layers.length; i++) {
      const layer = this.layers[i];
      h = tf.conv2d(h, layer.kernel as tf.Tensor4D, 1, 'same');
      if (layer.bias !== null) {
        h = tf.add(h, layer.bias);
      }
      if (layer.gamma !== null) {
        let mean: tf.Tensor;
        let variance: tf.Tensor;
        if (training) {
          ({mean, variance} = tf.moments(h, [0, 1, 2]));
          // frozen statistics track the batch ones outside the tape
          tf.tidy(() => {
            const lm = layer.movingMean!;
            const lv = layer.movingVar!;
            lm.assign(lm.mul(BN_MOMENTUM).add(mean.mul(1 - BN_MOMENTUM)));
            lv.assign(lv.mul(BN_MOMENTUM).add(variance.mul(1 - BN_MOMENTUM)));
          });
        } else {
          mean = layer.movingMean!;
          variance = layer.movingVar!;
        }
        h = tf.add(
          tf.mul(tf.div(tf.sub(h, mean), tf.sqrt(tf.add(variance, BN_EPS))),
                 layer.gamma),
          layer.beta!) as tf.Tensor4D;
      }
      if (i < this.layers.length - 1) {
        h = tf.relu(h);
      }
    }
    return h;
  }

  trainables(): tf.Variable[] {
    const vars: tf.Variable[] = [];
    for (const l of this.layers) {
      vars.push(l.kernel);
      if (l.bias) vars.push(l.bias);
      if (l.gamma) vars.push(l.gamma);
      if (l.beta) vars.push(l.beta);
    }
    return vars;
  }

  /** Zero the final layer so the predicted residual is exactly 0. */
  zeroOutput(): void {
    const last = this.layers[this.layers.length - 1];
    last.kernel.assign(tf.zerosLike(last.kernel));
    if (last.bias) last.bias.assign(tf.zerosLike(last.bias));
  }

  dispose(): void {
    for (const l of this.layers) {
      for (const v of [l.kernel, l.bias, l.gamma, l.beta, l.movingMean, l.movingVar]) {
        if (v) v.dispose();
      }
    }
  }
}

/** Denoised image = input - predicted residual (inference statistics). */
export function denoise(model: ResidualDenoiser, image: tf.Tensor2D): tf.Tensor2D {
  return tf.tidy(() => {
    const batched = image.reshape([1, image.shape[0], image.shape[1], 1]) as tf.Tensor4D;
    const residual = model.forward(batched, false);
    return batched.sub(residual)
      .reshape([image.shape[0], image.shape[1]]) as tf.Tensor2D;
  });
}

interface TensorBlob {
  shape: number[];
  dataBase64: string;
}

interface CheckpointFile {
  format: 'prdn-checkpoint-v1';
  spec: ModelSpec;
  layers: {[name: string]: TensorBlob | null}[];
}

function blob(t: tf.Tensor | tf.Variable | null): TensorBlob | null {
  if (t === null) return null;
  const data = t.dataSync() as Float32Array;
  return {
    shape: t.shape.slice(),
    dataBase64: Buffer.from(data.buffer, data.byteOffset, 4 * data.length)
      .toString('base64'),
  };
}

function unblob(b: TensorBlob | null): tf.Tensor | null {
  if (b === null) return null;
  const raw = Buffer.from(b.dataBase64, 'base64');
  const data = new Float32Array(raw.buffer.slice(raw.byteOffset,
                                                 raw.byteOffset + raw.byteLength));
  return tf.tensor(data, b.shape);
}

const FIELDS = ['kernel', 'bias', 'gamma', 'beta', 'movingMean', 'movingVar'] as const;

export async function saveCheckpoint(model: ResidualDenoiser,
                                     filePath: string): Promise<void> {
  const payload: CheckpointFile = {
    format: 'prdn-checkpoint-v1',
    spec: model.spec,
    layers: model.layers.map((l) => {
      const entry: {[name: string]: TensorBlob | null} = {};
      for (const f of FIELDS) entry[f] = blob(l[f]);
      return entry;
    }),
  };
  fs.mkdirSync(path.dirname(path.resolve(filePath)), {recursive: true});
  fs.writeFileSync(filePath, JSON.stringify(payload));
}

export async function loadCheckpoint(
    filePath: string): Promise<{model: ResidualDenoiser; spec: ModelSpec}> {
  const payload = JSON.parse(fs.readFileSync(filePath, 'utf-8')) as CheckpointFile;
  if (payload.format !== 'prdn-checkpoint-v1') {
    throw new Error(`${filePath}: unknown checkpoint format`);
  }
  const layers: ConvLayer[] = payload.layers.map((entry) => {
    const tensors: {[name: string]: tf.Tensor | null} = {};
    for (const f of FIELDS) tensors[f] = unblob(entry[f] ?? null);
    const trainableFlags: {[name: string]: boolean} =
      {kernel: true, bias: true, gamma: true, beta: true,
       movingMean: false, movingVar: false};
    const out: Partial<ConvLayer> = {};
    for (const f of FIELDS) {
      out[f] = (tensors[f] === null
        ? null
        : tf.variable(tensors[f]!, trainableFlags[f])) as never;
    }
    return out as ConvLayer;
  });
  const model = new ResidualDenoiser(payload.spec, layers);
  return {model, spec: payload.spec};
}
