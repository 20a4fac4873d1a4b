// Transport state for the playback panel.
//
// Pure state machine: the DOM layer feeds it user intents and fetch
// outcomes, and asks which frames to prefetch. Reversal works until the
// server answers 409, at which point scrubbing below the discovered
// floor is disabled and a notice is exposed instead of an error.

export interface PlaybackState {
  frame: number;
  playing: boolean;
  // lowest frame the server allows; null until a 409 pins it
  reverseFloor: number | null;
  notice: string | null;
}

export const PREFETCH_RADIUS = 5;

export function initialPlayback(): PlaybackState {
  return { frame: 0, playing: false, reverseFloor: null, notice: null };
}

export function togglePlay(state: PlaybackState): PlaybackState {
  return { ...state, playing: !state.playing };
}

export function tick(state: PlaybackState): PlaybackState {
  return state.playing ? { ...state, frame: state.frame + 1 } : state;
}

export function scrubTo(state: PlaybackState, frame: number): PlaybackState {
  if (state.reverseFloor !== null && frame < state.reverseFloor) {
    return {
      ...state,
      frame: state.reverseFloor,
      notice: `reversal limited: frames below ${state.reverseFloor} are blocked`,
    };
  }
  return { ...state, frame, notice: null };
}

// A 409 on frame k means every frame below the current one is off-limits
// (the blocking eigenvalues do not depend on k); clamp at the last frame
// that was known to work.
export function onReversalBlocked(
  state: PlaybackState,
  attempted: number,
  blockedModes: number[],
): PlaybackState {
  const floor = attempted + 1;
  return {
    ...state,
    playing: false,
    frame: Math.max(state.frame, floor),
    reverseFloor: floor,
    notice:
      `time reversal blocked by ${blockedModes.length} near-zero mode(s) ` +
      `[${blockedModes.join(", ")}]; scrub limited to k >= ${floor}`,
  };
}

export function prefetchTargets(state: PlaybackState): number[] {
  const targets: number[] = [];
  for (let d = -PREFETCH_RADIUS; d <= PREFETCH_RADIUS; d++) {
    const k = state.frame + d;
    if (state.reverseFloor !== null && k < state.reverseFloor) continue;
    targets.push(k);
  }
  return targets;
}

// Latest-wins request bookkeeping: at most one in-flight frame request
// per panel; stale responses are dropped by generation number.
export class LatestWins {
  private generation = 0;

  begin(): number {
    return ++this.generation;
  }

  isCurrent(token: number): boolean {
    return token === this.generation;
  }
}
