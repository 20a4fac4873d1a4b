// Geometry for the complex-plane spectrum panel: eigenvalue dots around
// the unit circle, colored by live cluster membership.

import type { EigenInfo } from "./types.js";
import { clusterIndices } from "./editspec.js";

export interface SpectrumPoint {
  x: number; // canvas coordinates
  y: number;
  cluster: "low" | "high";
  modulus: number;
  freq: number;
}

export const LOW_COLOR = "#4a90d9";
export const HIGH_COLOR = "#e2703a";

export function layoutSpectrum(
  eigenvalues: EigenInfo[],
  threshold: number,
  size: number,
): SpectrumPoint[] {
  const { low } = clusterIndices(eigenvalues, threshold);
  const lowSet = new Set(low);
  // scale so the unit circle fills 70% of the panel and outliers stay visible
  const maxMod = Math.max(1, ...eigenvalues.map((e) => e.modulus));
  const scale = (0.45 * size) / maxMod;
  const cx = size / 2;
  const cy = size / 2;
  return eigenvalues.map((eig, i) => ({
    x: cx + eig.re * scale,
    y: cy - eig.im * scale,
    cluster: lowSet.has(i) ? "low" : "high",
    modulus: eig.modulus,
    freq: eig.freq,
  }));
}

export function unitCircleRadius(eigenvalues: EigenInfo[], size: number): number {
  const maxMod = Math.max(1, ...eigenvalues.map((e) => e.modulus));
  return (0.45 * size) / maxMod;
}
