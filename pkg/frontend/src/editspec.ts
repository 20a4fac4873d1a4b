// Edit-spec construction and serialization.
//
// The slider UI exposes one knob bank per frequency cluster; the server
// wants per-mode arrays. Cluster membership is recomputed from the
// served eigenvalues so the live threshold slider matches the server's
// clustering rule exactly: a mode is low-frequency iff |freq| < threshold.

import type { EditSpecBody, EditState, EigenInfo, ModelInfo } from "./types.js";

export function clusterIndices(
  eigenvalues: EigenInfo[],
  threshold: number,
): { low: number[]; high: number[] } {
  const low: number[] = [];
  const high: number[] = [];
  eigenvalues.forEach((eig, i) => {
    (Math.abs(eig.freq) < threshold ? low : high).push(i);
  });
  return { low, high };
}

export function expandEditState(state: EditState, model: ModelInfo): EditSpecBody {
  const { low } = clusterIndices(model.eigenvalues, state.threshold);
  const lowSet = new Set(low);
  const weights = new Array<number>(model.r);
  const growth = new Array<number>(model.r);
  const freq = new Array<number>(model.r);
  for (let i = 0; i < model.r; i++) {
    const bank = lowSet.has(i) ? state.low : state.high;
    weights[i] = bank.weight;
    growth[i] = bank.growth;
    freq[i] = bank.freq;
  }
  return {
    weights,
    growth_scale: growth,
    freq_scale: freq,
    cluster_threshold: state.threshold,
  };
}

export function identityEditState(threshold = 0.01): EditState {
  return {
    threshold,
    low: { weight: 1, growth: 1, freq: 1 },
    high: { weight: 1, growth: 1, freq: 1 },
  };
}

// The CLI and the service share one text schema ("key = value" lines);
// round-tripping through it keeps saved slider presets loadable everywhere.

export function editSpecToText(spec: EditSpecBody): string {
  const lines = [
    "kind = editspec",
    `r = ${spec.weights.length}`,
    `cluster_threshold = ${formatNumber(spec.cluster_threshold)}`,
    `weights = ${spec.weights.map(formatNumber).join(",")}`,
    `growth_scale = ${spec.growth_scale.map(formatNumber).join(",")}`,
    `freq_scale = ${spec.freq_scale.map(formatNumber).join(",")}`,
  ];
  return lines.join("\n") + "\n";
}

export function editSpecFromText(text: string): EditSpecBody {
  const kv = new Map<string, string>();
  for (const raw of text.split("\n")) {
    const line = raw.trim();
    if (!line || line.startsWith("#")) continue;
    const eq = line.indexOf("=");
    if (eq < 0) throw new Error(`expected 'key = value', got: ${raw}`);
    kv.set(line.slice(0, eq).trim(), line.slice(eq + 1).trim());
  }
  if (kv.get("kind") !== "editspec") throw new Error("not an edit spec");
  const parseList = (key: string): number[] => {
    const raw = kv.get(key);
    if (raw === undefined) throw new Error(`missing ${key}`);
    return raw.split(",").map((v) => {
      const num = Number(v);
      if (!Number.isFinite(num)) throw new Error(`bad number in ${key}: ${v}`);
      return num;
    });
  };
  const spec: EditSpecBody = {
    weights: parseList("weights"),
    growth_scale: parseList("growth_scale"),
    freq_scale: parseList("freq_scale"),
    cluster_threshold: Number(kv.get("cluster_threshold") ?? "0.01"),
  };
  const r = kv.get("r");
  if (r !== undefined && Number(r) !== spec.weights.length) {
    throw new Error(`spec declares r = ${r} but carries ${spec.weights.length}`);
  }
  if (
    spec.growth_scale.length !== spec.weights.length ||
    spec.freq_scale.length !== spec.weights.length
  ) {
    throw new Error("weight, growth, and frequency arrays must share a length");
  }
  return spec;
}

function formatNumber(v: number): string {
  // keep integers clean, everything else at full double precision
  return Number.isInteger(v) ? v.toFixed(1) : String(v);
}

export function isIdentity(spec: EditSpecBody): boolean {
  const one = (v: number) => v === 1;
  return (
    spec.weights.every(one) && spec.growth_scale.every(one) && spec.freq_scale.every(one)
  );
}
