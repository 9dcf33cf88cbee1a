import * as tf from '@tensorflow/tfjs';
import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';
import {afterAll, beforeAll, describe, expect, it} from 'vitest';

import {initBackend} from '../src/backend';
import {denoise, loadCheckpoint, ResidualDenoiser, saveCheckpoint} from '../src/model';

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), 'model-'));
beforeAll(async () => {
  await initBackend();
}, 120_000);
afterAll(() => fs.rmSync(tmp, {recursive: true, force: true}));

describe('residual model', () => {
  it('identity weights return the input exactly', async () => {
    const m = ResidualDenoiser.build({depth: 3, channels: 8, sigma: 25}, 7);
    m.zeroOutput();
    const x = tf.randomUniform([12, 10], 0, 255) as tf.Tensor2D;
    const y = denoise(m, x);
    const dx = (await x.data()) as Float32Array;
    const dy = (await y.data()) as Float32Array;
    expect(Array.from(dy)).toEqual(Array.from(dx));
  });

  it('conv gradient override matches finite differences', async () => {
    const x = tf.randomNormal([2, 8, 8, 3]) as tf.Tensor4D;
    const w = tf.randomNormal([3, 3, 3, 4], 0, 0.5) as tf.Tensor4D;
    const f = (xv: tf.Tensor, wv: tf.Tensor) =>
      tf.sum(tf.square(tf.conv2d(xv as tf.Tensor4D, wv as tf.Tensor4D, 1, 'same')));
    const [gx, gw] = tf.grads(f)([x, w]);
    const wData = (await w.data()) as Float32Array;
    const xData = (await x.data()) as Float32Array;
    const eps = 1e-2;
    const fAt = async (xa: Float32Array, wa: Float32Array) => {
      const t = f(tf.tensor(xa, x.shape), tf.tensor(wa, w.shape));
      return ((await t.data()) as Float32Array)[0];
    };
    for (const idx of [0, 17, 53]) {
      const wp = Float32Array.from(wData); wp[idx] += eps;
      const wm = Float32Array.from(wData); wm[idx] -= eps;
      const fd = ((await fAt(xData, wp)) - (await fAt(xData, wm))) / (2 * eps);
      const an = ((await gw.data()) as Float32Array)[idx];
      expect(Math.abs(fd - an)).toBeLessThan(2e-2 * Math.max(1, Math.abs(an)));
    }
    for (const idx of [3, 40]) {
      const xp = Float32Array.from(xData); xp[idx] += eps;
      const xm = Float32Array.from(xData); xm[idx] -= eps;
      const fd = ((await fAt(xp, wData)) - (await fAt(xm, wData))) / (2 * eps);
      const an = ((await gx.data()) as Float32Array)[idx];
      expect(Math.abs(fd - an)).toBeLessThan(2e-2 * Math.max(1, Math.abs(an)));
    }
  }, 120_000);

  it('checkpoints round trip weights and spec', async () => {
    const spec = {depth: 4, channels: 8, sigma: 40};
    const m = ResidualDenoiser.build(spec, 3);
    const file = path.join(tmp, 'ck.json');
    await saveCheckpoint(m, file);
    const {model: m2, spec: spec2} = await loadCheckpoint(file);
    expect(spec2).toEqual(spec);
    const x = tf.randomUniform([16, 16], 0, 255) as tf.Tensor2D;
    const a = (await denoise(m, x).data()) as Float32Array;
    const b = (await denoise(m2, x).data()) as Float32Array;
    expect(Array.from(b)).toEqual(Array.from(a));
  });

  it('is shift covariant away from the borders', async () => {
    // purely convolutional: cyclic shift commutes with the network except
    // within a border set by the receptive field plus the shift itself
    const depth = 4;
    const m = ResidualDenoiser.build({depth, channels: 8, sigma: 25}, 11);
    const n = 40;
    const dy = 5, dx = 3;
    const x = tf.randomUniform([n, n], 0, 255) as tf.Tensor2D;
    const roll = (t: tf.Tensor2D): tf.Tensor2D => tf.tidy(() => {
      const rows = tf.concat([t.slice([n - dy, 0], [dy, n]), t.slice([0, 0], [n - dy, n])], 0);
      return tf.concat([rows.slice([0, n - dx], [n, dx]), rows.slice([0, 0], [n, n - dx])], 1) as tf.Tensor2D;
    });
    const a = denoise(m, roll(x));              // D(shift(x))
    const b = roll(denoise(m, x));              // shift(D(x))
    const margin = depth + Math.max(dy, dx);
    const size = [n - 2 * margin, n - 2 * margin];
    const da = (await a.slice([margin, margin], size).data()) as Float32Array;
    const db = (await b.slice([margin, margin], size).data()) as Float32Array;
    let worst = 0;
    for (let i = 0; i < da.length; i++) worst = Math.max(worst, Math.abs(da[i] - db[i]));
    expect(worst).toBeLessThan(1e-4);
  });
});
