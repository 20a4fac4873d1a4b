import assert from "node:assert/strict";
import { test } from "node:test";

import {
  LatestWins,
  initialPlayback,
  onReversalBlocked,
  prefetchTargets,
  scrubTo,
  tick,
  togglePlay,
} from "../src/playback.js";

test("play/pause and ticking", () => {
  let state = initialPlayback();
  state = togglePlay(state);
  assert.ok(state.playing);
  state = tick(state);
  assert.equal(state.frame, 1);
  state = togglePlay(state);
  assert.equal(tick(state).frame, 1);
});

test("scrubbing to negative frames is allowed until blocked", () => {
  let state = initialPlayback();
  state = scrubTo(state, -40);
  assert.equal(state.frame, -40);
  assert.equal(state.notice, null);
});

test("a 409 pins the reversal floor and surfaces a notice", () => {
  let state = initialPlayback();
  state = scrubTo(state, -10);
  state = onReversalBlocked(state, -10, [3, 7]);
  assert.equal(state.reverseFloor, -9);
  assert.ok(state.notice?.includes("[3, 7]"));
  assert.ok(!state.playing);
  // further scrubs below the floor clamp and explain
  state = scrubTo(state, -50);
  assert.equal(state.frame, -9);
  assert.ok(state.notice?.includes("blocked"));
});

test("prefetch window respects the reversal floor", () => {
  let state = initialPlayback();
  state = scrubTo(state, 10);
  assert.deepEqual(prefetchTargets(state), [5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15]);
  state = onReversalBlocked(state, 7, [0]);
  state = scrubTo(state, 10);
  assert.deepEqual(prefetchTargets(state), [8, 9, 10, 11, 12, 13, 14, 15]);
});

test("latest-wins drops stale responses", () => {
  const race = new LatestWins();
  const first = race.begin();
  const second = race.begin();
  assert.ok(!race.isCurrent(first));
  assert.ok(race.isCurrent(second));
});
