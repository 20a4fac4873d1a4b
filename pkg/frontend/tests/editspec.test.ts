import assert from "node:assert/strict";
import { test } from "node:test";

import {
  clusterIndices,
  editSpecFromText,
  editSpecToText,
  expandEditState,
  identityEditState,
  isIdentity,
} from "../src/editspec.js";
import type { EigenInfo, ModelInfo } from "../src/types.js";

function eig(re: number, im: number, dt = 1): EigenInfo {
  return { re, im, modulus: Math.hypot(re, im), freq: Math.atan2(im, re) / dt };
}

const model: ModelInfo = {
  n: 100,
  r: 5,
  dt: 1,
  grid: { kind: "none" },
  eigenvalues: [
    eig(0.999, 0),
    eig(0.99, 0.004),
    eig(0.99, -0.004),
    eig(0.8, 0.5),
    eig(0.8, -0.5),
  ],
  clusters: { threshold: 0.01, low: [0, 1, 2], high: [3, 4] },
};

test("clusterIndices matches the served threshold rule", () => {
  const { low, high } = clusterIndices(model.eigenvalues, 0.01);
  assert.deepEqual(low, [0, 1, 2]);
  assert.deepEqual(high, [3, 4]);
});

test("conjugate pairs always land in one cluster", () => {
  for (const threshold of [0.001, 0.01, 0.1, 1]) {
    const { low } = clusterIndices(model.eigenvalues, threshold);
    const lowSet = new Set(low);
    assert.equal(lowSet.has(1), lowSet.has(2));
    assert.equal(lowSet.has(3), lowSet.has(4));
  }
});

test("expandEditState gives pair-consistent per-mode arrays", () => {
  const state = identityEditState();
  state.high.weight = 1.5;
  state.low.growth = 0.7;
  const body = expandEditState(state, model);
  assert.deepEqual(body.weights, [1, 1, 1, 1.5, 1.5]);
  assert.deepEqual(body.growth_scale, [0.7, 0.7, 0.7, 1, 1]);
  assert.equal(body.weights[1], body.weights[2]);
  assert.equal(body.weights[3], body.weights[4]);
});

test("slider state round-trips through the shared text schema", () => {
  const state = identityEditState(0.02);
  state.high.weight = 0.5;
  state.high.freq = 1.25;
  const body = expandEditState(state, model);
  const text = editSpecToText(body);
  const back = editSpecFromText(text);
  assert.deepEqual(back.weights, body.weights);
  assert.deepEqual(back.growth_scale, body.growth_scale);
  assert.deepEqual(back.freq_scale, body.freq_scale);
  assert.equal(back.cluster_threshold, body.cluster_threshold);
});

test("identity detection", () => {
  const body = expandEditState(identityEditState(), model);
  assert.ok(isIdentity(body));
  body.weights[0] = 0.9;
  assert.ok(!isIdentity(body));
});

test("malformed spec text is rejected", () => {
  assert.throws(() => editSpecFromText("kind = editspec\nweights = 1,oops\n"));
  assert.throws(() => editSpecFromText("kind = dataset\n"));
  assert.throws(() =>
    editSpecFromText(
      "kind = editspec\nr = 3\nweights = 1,1\ngrowth_scale = 1,1\nfreq_scale = 1,1\n",
    ),
  );
});
