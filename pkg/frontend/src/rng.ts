/** Deterministic 32-bit PRNG (mulberry32) and a Gaussian filler. */

export function makeRng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function gaussianPair(rng: () => number): [number, number] {
  const u = Math.max(rng(), 1e-12);
  const v = rng();
  const r = Math.sqrt(-2 * Math.log(u));
  return [r * Math.cos(2 * Math.PI * v), r * Math.sin(2 * Math.PI * v)];
}

export function fillGaussian(out: Float32Array, rng: () => number,
                             scale: number): void {
  for (let i = 0; i + 1 < out.length; i += 2) {
    const [a, b] = gaussianPair(rng);
    out[i] = scale * a;
    out[i + 1] = scale * b;
  }
  if (out.length % 2 === 1) out[out.length - 1] = scale * gaussianPair(rng)[0];
}
