/**
 * Minimal float64 DSP for the built-in metrics: periodic Hann window,
 * radix-2 FFT, one-sided magnitude STFT with left-aligned frames, and the
 * spectrogram/waveform distances.  Conventions mirror the benchmark core
 * so the spectrogram_l1 metric agrees with in-core evaluation.
 */

export function hannWindow(n: number): Float64Array {
  if (n < 2) throw new Error(`window length must be >= 2, got ${n}`);
  const w = new Float64Array(n);
  for (let k = 0; k < n; k++) {
    w[k] = 0.5 * (1.0 - Math.cos((2.0 * Math.PI * k) / n));
  }
  return w;
}

function bitReverse(n: number): Uint32Array {
  const bits = Math.log2(n) | 0;
  const rev = new Uint32Array(n);
  for (let i = 0; i < n; i++) {
    let x = i;
    let r = 0;
    for (let b = 0; b < bits; b++) {
      r = (r << 1) | (x & 1);
      x >>= 1;
    }
    rev[i] = r;
  }
  return rev;
}

const twiddleCache = new Map<number, { cos: Float64Array; sin: Float64Array }>();

function twiddles(m: number) {
  let t = twiddleCache.get(m);
  if (!t) {
    const half = m / 2;
    const cos = new Float64Array(half);
    const sin = new Float64Array(half);
    for (let k = 0; k < half; k++) {
      cos[k] = Math.cos((-2.0 * Math.PI * k) / m);
      sin[k] = Math.sin((-2.0 * Math.PI * k) / m);
    }
    t = { cos, sin };
    twiddleCache.set(m, t);
  }
  return t;
}

/** In-place iterative radix-2 DIT FFT over interleaved re/im pairs. */
export function fftComplex(re: Float64Array, im: Float64Array): void {
  const n = re.length;
  if (n < 1 || (n & (n - 1)) !== 0) {
    throw new Error(`fft length must be a power of two, got ${n}`);
  }
  const rev = bitReverse(n);
  for (let i = 0; i < n; i++) {
    const j = rev[i];
    if (j > i) {
      const tr = re[i]; re[i] = re[j]; re[j] = tr;
      const ti = im[i]; im[i] = im[j]; im[j] = ti;
    }
  }
  for (let m = 2; m <= n; m <<= 1) {
    const half = m >> 1;
    const { cos, sin } = twiddles(m);
    for (let start = 0; start < n; start += m) {
      for (let k = 0; k < half; k++) {
        const i = start + k;
        const j = i + half;
        const wr = cos[k];
        const wi = sin[k];
        const xr = re[j] * wr - im[j] * wi;
        const xi = re[j] * wi + im[j] * wr;
        re[j] = re[i] - xr;
        im[j] = im[i] - xi;
        re[i] += xr;
        im[i] += xi;
      }
    }
  }
}

/** O(n^2) reference DFT, used only by the test oracle. */
export function naiveDft(x: Float64Array): { re: Float64Array; im: Float64Array } {
  const n = x.length;
  const re = new Float64Array(n);
  const im = new Float64Array(n);
  for (let k = 0; k < n; k++) {
    let sr = 0.0;
    let si = 0.0;
    for (let t = 0; t < n; t++) {
      const a = (-2.0 * Math.PI * k * t) / n;
      sr += x[t] * Math.cos(a);
      si += x[t] * Math.sin(a);
    }
    re[k] = sr;
    im[k] = si;
  }
  return { re, im };
}

export interface StftOptions {
  nfft: number;
  overlap: number;
}

/** One-sided magnitude STFT, frames left-aligned, tail frame dropped. */
export function stftMagnitude(x: Float64Array, opts: StftOptions): Float64Array[] {
  const { nfft, overlap } = opts;
  const hop = Math.round(nfft * (1.0 - overlap));
  if (hop < 1) throw new Error("hop must be >= 1");
  if (x.length < nfft) {
    throw new Error(`waveform of ${x.length} samples is shorter than nfft=${nfft}`);
  }
  const window = hannWindow(nfft);
  const nFrames = Math.floor((x.length - nfft) / hop) + 1;
  const nBins = nfft / 2 + 1;
  const frames: Float64Array[] = [];
  const re = new Float64Array(nfft);
  const im = new Float64Array(nfft);
  for (let f = 0; f < nFrames; f++) {
    const start = f * hop;
    for (let k = 0; k < nfft; k++) {
      re[k] = x[start + k] * window[k];
      im[k] = 0.0;
    }
    fftComplex(re, im);
    const mag = new Float64Array(nBins);
    for (let k = 0; k < nBins; k++) {
      mag[k] = Math.hypot(re[k], im[k]);
    }
    frames.push(mag);
  }
  return frames;
}

/** Entrywise l1 between magnitude spectrograms (nfft 2048, overlap 0.75). */
export function spectrogramL1(target: Float64Array, prediction: Float64Array): number {
  const opts = { nfft: 2048, overlap: 0.75 };
  const a = stftMagnitude(target, opts);
  const b = stftMagnitude(prediction, opts);
  let total = 0.0;
  for (let f = 0; f < a.length; f++) {
    const fa = a[f];
    const fb = b[f];
    for (let k = 0; k < fa.length; k++) {
      total += Math.abs(fa[k] - fb[k]);
    }
  }
  return total;
}

/** Plain l2 between the raw sample arrays. */
export function waveformL2(target: Float64Array, prediction: Float64Array): number {
  let total = 0.0;
  for (let i = 0; i < target.length; i++) {
    const d = target[i] - prediction[i];
    total += d * d;
  }
  return Math.sqrt(total);
}

/** Linear-interpolation resampler for the embedding metric. */
export function resampleLinear(x: Float64Array, fromHz: number, toHz: number): Float64Array {
  if (fromHz === toHz) return x;
  const outLen = Math.max(1, Math.round((x.length * toHz) / fromHz));
  const out = new Float64Array(outLen);
  const scale = (x.length - 1) / Math.max(1, outLen - 1);
  for (let i = 0; i < outLen; i++) {
    const pos = i * scale;
    const lo = Math.floor(pos);
    const hi = Math.min(lo + 1, x.length - 1);
    const frac = pos - lo;
    out[i] = x[lo] * (1 - frac) + x[hi] * frac;
  }
  return out;
}
