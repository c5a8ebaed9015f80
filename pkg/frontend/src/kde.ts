import { SchemaError } from "./errors";

export interface Density {
  x: number[];
  y: number[];
}

function weightedQuantile(sorted: number[], cumWeights: number[], q: number): number {
  const total = cumWeights[cumWeights.length - 1]!;
  const target = q * total;
  let lo = 0;
  let hi = cumWeights.length - 1;
  while (lo < hi) {
    const mid = (lo + hi) >> 1;
    if (cumWeights[mid]! < target) lo = mid + 1;
    else hi = mid;
  }
  return sorted[lo]!;
}

/**
 * Silverman's rule of thumb on a weighted sample.
 *
 * Uses the effective sample size (sum w)^2 / sum w^2 in place of n and the
 * smaller of the weighted standard deviation and IQR/1.34 as the scale.
 */
export function silvermanBandwidth(values: number[], weights: number[]): number {
  const total = weights.reduce((a, b) => a + b, 0);
  const sumSq = weights.reduce((a, b) => a + b * b, 0);
  const neff = (total * total) / sumSq;
  const mean = values.reduce((a, v, i) => a + v * weights[i]!, 0) / total;
  const variance =
    values.reduce((a, v, i) => a + weights[i]! * (v - mean) * (v - mean), 0) / total;
  const sd = Math.sqrt(variance);

  const order = values.map((_, i) => i).sort((a, b) => values[a]! - values[b]!);
  const sorted = order.map((i) => values[i]!);
  const cum: number[] = [];
  let acc = 0;
  for (const i of order) {
    acc += weights[i]!;
    cum.push(acc);
  }
  const iqr = weightedQuantile(sorted, cum, 0.75) - weightedQuantile(sorted, cum, 0.25);

  let scale = Math.min(sd, iqr / 1.34);
  if (!(scale > 0)) scale = sd;
  if (!(scale > 0)) scale = 1;
  return 0.9 * scale * Math.pow(neff, -0.2);
}

/**
 * Weighted Gaussian kernel density estimate on an evenly spaced grid.
 *
 * The grid spans the sample range padded by three bandwidths, so the
 * estimate decays to ~0 at both ends.
 */
export function gaussianKde(
  values: number[],
  weights: number[],
  gridSize = 256,
): Density {
  if (values.length === 0) throw new SchemaError("cannot estimate a density from zero rows");
  if (values.length !== weights.length) {
    throw new SchemaError("values and weights must have equal length");
  }
  const total = weights.reduce((a, b) => a + b, 0);
  if (!(total > 0)) throw new SchemaError("weights must have a positive sum");

  const h = silvermanBandwidth(values, weights);
  const lo = Math.min(...values) - 3 * h;
  const hi = Math.max(...values) + 3 * h;
  const x: number[] = new Array(gridSize);
  const y: number[] = new Array(gridSize).fill(0);
  const step = (hi - lo) / (gridSize - 1);
  const norm = 1 / (total * h * Math.sqrt(2 * Math.PI));
  for (let g = 0; g < gridSize; g++) {
    const xg = lo + g * step;
    x[g] = xg;
    let acc = 0;
    for (let i = 0; i < values.length; i++) {
      const z = (xg - values[i]!) / h;
      acc += weights[i]! * Math.exp(-0.5 * z * z);
    }
    y[g] = acc * norm;
  }
  return { x, y };
}

/** Weighted histogram normalized to a density over fixed bounds. */
export function weightedHistogram(
  values: number[],
  weights: number[],
  bins: number,
  lo: number,
  hi: number,
): { edges: number[]; density: number[] } {
  const total = weights.reduce((a, b) => a + b, 0);
  if (!(total > 0)) throw new SchemaError("weights must have a positive sum");
  const width = (hi - lo) / bins;
  const counts = new Array<number>(bins).fill(0);
  for (let i = 0; i < values.length; i++) {
    const v = values[i]!;
    if (v < lo || v > hi) continue;
    const b = Math.min(bins - 1, Math.floor((v - lo) / width));
    counts[b] = counts[b]! + weights[i]!;
  }
  const edges = Array.from({ length: bins + 1 }, (_, i) => lo + i * width);
  const density = counts.map((c) => c / (total * width));
  return { edges, density };
}
