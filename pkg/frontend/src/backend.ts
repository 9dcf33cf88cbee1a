/**
 * WASM backend bootstrap.
 *
 * The wasm backend ships forward convolution kernels but not the filter
 * gradient, so the stock Conv2D gradient cannot run there. It is replaced
 * with an equivalent one whose filter derivative is a sum of channel
 * matmuls between shifted input windows and the output gradient: for a
 * stride-1 convolution,
 *
 *   dW[ky, kx, :, :] = reshape(shift(x, ky, kx))^T @ reshape(dy)
 *
 * built from pad/slice/matMul, which the backend supports. The input
 * derivative keeps using the native transposed convolution kernel.
 */
import * as tf from '@tensorflow/tfjs';
import * as wasm from '@tensorflow/tfjs-backend-wasm';
import * as path from 'path';

let initialized: Promise<void> | null = null;

function filterGradient(x: tf.Tensor4D, dy: tf.Tensor4D,
                        fh: number, fw: number, pad: string): tf.Tensor4D {
  const [b, , , ci] = x.shape;
  const [, ho, wo, co] = dy.shape;
  let padTop: number;
  let padLeft: number;
  if (pad === 'same') {
    padTop = Math.floor((fh - 1) / 2);
    padLeft = Math.floor((fw - 1) / 2);
  } else if (pad === 'valid') {
    padTop = 0;
    padLeft = 0;
  } else {
    throw new Error(`conv filter gradient: pad mode ${pad} unsupported`);
  }
  return tf.tidy(() => {
    const xp = tf.pad(x, [
      [0, 0], [padTop, fh - 1 - padTop], [padLeft, fw - 1 - padLeft], [0, 0],
    ]);
    const dyMat = tf.reshape(dy, [b * ho * wo, co]);
    const taps: tf.Tensor[] = [];
    for (let ky = 0; ky < fh; ky++) {
      for (let kx = 0; kx < fw; kx++) {
        const win = tf.slice(xp, [0, ky, kx, 0], [b, ho, wo, ci]);
        taps.push(tf.matMul(tf.reshape(win, [b * ho * wo, ci]), dyMat, true, false));
      }
    }
    return tf.reshape(tf.stack(taps, 0), [fh, fw, ci, co]) as tf.Tensor4D;
  });
}

function overrideConvGradient(): void {
  tf.unregisterGradient('Conv2D');
  tf.registerGradient({
    kernelName: 'Conv2D',
    inputsToSave: ['x', 'filter'],
    gradFunc: (dy, saved, attrs) => {
      const [x, filter] = saved as [tf.Tensor4D, tf.Tensor4D];
      const grad = dy as tf.Tensor4D;
      const a = attrs as unknown as {
        strides: number | [number, number];
        pad: string;
        dilations: number | [number, number] | null;
      };
      const sy = Array.isArray(a.strides) ? a.strides[0] : a.strides;
      const sx = Array.isArray(a.strides) ? a.strides[1] : a.strides;
      const dil = a.dilations == null ? 1
        : Array.isArray(a.dilations) ? a.dilations[0] : a.dilations;
      if (sy !== 1 || sx !== 1 || dil !== 1) {
        throw new Error('conv gradient override supports stride/dilation 1 only');
      }
      return {
        x: () => tf.conv2dTranspose(grad, filter, x.shape, 1,
                                    a.pad as 'same' | 'valid'),
        filter: () => filterGradient(x, grad, filter.shape[0], filter.shape[1],
                                     a.pad),
      };
    },
  });
}

/** Initialize the wasm backend once (SIMD on, threads off for node). */
export function initBackend(): Promise<void> {
  if (initialized === null) {
    initialized = (async () => {
      wasm.setWasmPaths(
        path.join(__dirname, '..', 'node_modules', '@tensorflow',
                  'tfjs-backend-wasm', 'dist') + path.sep);
      tf.env().set('WASM_HAS_SIMD_SUPPORT', true);
      tf.env().set('WASM_HAS_MULTITHREAD_SUPPORT', false);
      overrideConvGradient();
      try {
        await tf.setBackend('wasm');
        await tf.ready();
      } catch {
        // SIMD rejected by the runtime: fall back to the plain JS backend
        await tf.setBackend('cpu');
        await tf.ready();
      }
    })();
  }
  return initialized;
}
