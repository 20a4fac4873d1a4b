// DOM wiring for the editor. All numerical content comes from server
// frame payloads; this file only routes events and paints pixels.

import { FlowClient, ReversalBlockedError, ApiError } from "./api.js";
import {
  editSpecFromText,
  editSpecToText,
  expandEditState,
  identityEditState,
  isIdentity,
} from "./editspec.js";
import { dragToForce, type Drag } from "./force.js";
import {
  LatestWins,
  initialPlayback,
  onReversalBlocked,
  prefetchTargets,
  scrubTo,
  tick,
  togglePlay,
  type PlaybackState,
} from "./playback.js";
import { toRgba } from "./raster.js";
import { HIGH_COLOR, LOW_COLOR, layoutSpectrum, unitCircleRadius } from "./spectrum.js";
import type { EditState, FramePayload, ModelInfo } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const client = new FlowClient("");
let model: ModelInfo;
let sessionId: string | null = null;
let editState: EditState = identityEditState();
let playback: PlaybackState = initialPlayback();
const frameRace = new LatestWins();
const frameCache = new Map<number, FramePayload>();

function toast(message: string): void {
  const box = $("toasts");
  const el = document.createElement("div");
  el.className = "toast";
  el.textContent = message;
  box.appendChild(el);
  setTimeout(() => el.remove(), 6000);
}

function reportError(err: unknown): void {
  if (err instanceof ApiError) toast(`server: ${err.message}`);
  else toast(String(err));
}

// ---------------------------------------------------------------- spectrum

function drawSpectrum(): void {
  const canvas = $("spectrum") as unknown as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const size = canvas.width;
  ctx.clearRect(0, 0, size, size);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.arc(size / 2, size / 2, unitCircleRadius(model.eigenvalues, size), 0, 2 * Math.PI);
  ctx.stroke();
  for (const pt of layoutSpectrum(model.eigenvalues, editState.threshold, size)) {
    ctx.fillStyle = pt.cluster === "low" ? LOW_COLOR : HIGH_COLOR;
    ctx.beginPath();
    ctx.arc(pt.x, pt.y, 4, 0, 2 * Math.PI);
    ctx.fill();
  }
}

// ---------------------------------------------------------------- playback

async function fetchFrame(k: number): Promise<FramePayload | null> {
  const cached = frameCache.get(k);
  if (cached) return cached;
  if (!sessionId) return null;
  const frame = await client.getFrame(sessionId, k, fieldChoice(), "raster");
  frameCache.set(k, frame);
  return frame;
}

function fieldChoice(): "speed" | "density" {
  return ($("field") as unknown as HTMLSelectElement).value === "density"
    ? "density"
    : "speed";
}

function paint(frame: FramePayload): void {
  const canvas = $("view") as unknown as HTMLCanvasElement;
  canvas.width = frame.nx;
  canvas.height = frame.ny;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.putImageData(new ImageData(toRgba(frame), frame.nx, frame.ny), 0, 0);
}

async function showFrame(k: number): Promise<void> {
  const token = frameRace.begin();
  try {
    const frame = await fetchFrame(k);
    if (frame && frameRace.isCurrent(token)) {
      paint(frame);
      $("frame-label").textContent = `frame ${k}`;
      void prefetchAround();
    }
  } catch (err) {
    if (err instanceof ReversalBlockedError) {
      playback = onReversalBlocked(playback, k, err.blockedModes);
      syncTransport();
    } else {
      reportError(err);
    }
  }
}

async function prefetchAround(): Promise<void> {
  for (const k of prefetchTargets(playback)) {
    if (frameCache.has(k)) continue;
    try {
      await fetchFrame(k);
    } catch (err) {
      if (err instanceof ReversalBlockedError) {
        playback = onReversalBlocked(playback, k, err.blockedModes);
        syncTransport();
        break;
      }
      break; // stop prefetching on other errors; foreground will report
    }
  }
}

function syncTransport(): void {
  const scrub = $("scrub") as unknown as HTMLInputElement;
  scrub.value = String(playback.frame);
  if (playback.reverseFloor !== null) {
    scrub.min = String(playback.reverseFloor);
    $("reverse-note").textContent = playback.notice ?? "";
  } else {
    scrub.min = "-300";
    $("reverse-note").textContent = playback.notice ?? "";
  }
  $("play").textContent = playback.playing ? "pause" : "play";
}

// ---------------------------------------------------------------- sessions

function currentSliders(): EditState {
  const read = (id: string) => Number(($(id) as unknown as HTMLInputElement).value);
  return {
    threshold: read("threshold"),
    low: { weight: read("low-weight"), growth: read("low-growth"), freq: read("low-freq") },
    high: {
      weight: read("high-weight"),
      growth: read("high-growth"),
      freq: read("high-freq"),
    },
  };
}

async function applyEdit(): Promise<void> {
  editState = currentSliders();
  const body = expandEditState(editState, model);
  try {
    if (sessionId) await client.deleteSession(sessionId).catch(() => undefined);
    sessionId = await client.createSession({ ...body, start_frame: 0 });
    frameCache.clear();
    playback = initialPlayback();
    syncTransport();
    await showFrame(0);
    $("spec-text").textContent = editSpecToText(body);
    toast(isIdentity(body) ? "identity session created" : "edit applied");
  } catch (err) {
    reportError(err);
  }
}

// ---------------------------------------------------------------- force drag

function hookForceDrag(): void {
  const canvas = $("view") as unknown as HTMLCanvasElement;
  let drag: Drag | null = null;
  canvas.addEventListener("mousedown", (ev) => {
    drag = { startX: ev.offsetX, startY: ev.offsetY, endX: ev.offsetX, endY: ev.offsetY };
  });
  canvas.addEventListener("mousemove", (ev) => {
    if (drag) {
      drag.endX = ev.offsetX;
      drag.endY = ev.offsetY;
    }
  });
  canvas.addEventListener("mouseup", async () => {
    if (!drag || !sessionId) return;
    try {
      const force = dragToForce(drag, model.grid, canvas.clientWidth, canvas.clientHeight);
      const frame = await client.postForce(sessionId, force);
      frameCache.clear(); // session state moved; cached frames are stale
      playback = scrubTo(playback, frame);
      syncTransport();
      await showFrame(frame);
      toast(`impulse applied at frame ${frame}`);
    } catch (err) {
      reportError(err);
    } finally {
      drag = null;
    }
  });
}

// ---------------------------------------------------------------- upres

async function upresPreview(): Promise<void> {
  if (!sessionId || model.grid.kind !== "grid") return;
  const factor = Number(($("upres-factor") as unknown as HTMLInputElement).value);
  const split = Number(($("upres-split") as unknown as HTMLInputElement).value);
  const nx = model.grid.nx ?? 0;
  const ny = model.grid.ny ?? 0;
  const lowLen = (nx / factor + 1) * (ny / factor) + (nx / factor) * (ny / factor + 1);
  const low = new Array<number>(lowLen).fill(0); // still-air guide as a demo input
  try {
    const naive = await client.postUpres(sessionId, low, factor, split, false);
    const projected = await client.postUpres(sessionId, low, factor, split, true);
    const paintTo = (id: string, frame: FramePayload) => {
      const canvas = $(id) as unknown as HTMLCanvasElement;
      canvas.width = frame.nx;
      canvas.height = frame.ny;
      canvas
        .getContext("2d")
        ?.putImageData(new ImageData(toRgba(frame), frame.nx, frame.ny), 0, 0);
    };
    paintTo("upres-naive", naive);
    paintTo("upres-projected", projected);
  } catch (err) {
    reportError(err);
  }
}

// ---------------------------------------------------------------- startup

async function start(): Promise<void> {
  try {
    model = await client.getModel();
  } catch (err) {
    reportError(err);
    return;
  }
  $("model-label").textContent =
    `n=${model.n} r=${model.r} dt=${model.dt} ` +
    `(${model.clusters.low.length} low / ${model.clusters.high.length} high)`;
  drawSpectrum();
  hookForceDrag();

  $("threshold").addEventListener("input", () => {
    editState = currentSliders();
    drawSpectrum();
  });
  $("apply").addEventListener("click", () => void applyEdit());
  $("play").addEventListener("click", () => {
    playback = togglePlay(playback);
    syncTransport();
  });
  ($("scrub") as unknown as HTMLInputElement).addEventListener("input", (ev) => {
    const value = Number((ev.target as HTMLInputElement).value);
    playback = scrubTo(playback, value);
    syncTransport();
    void showFrame(playback.frame);
  });
  $("field").addEventListener("change", () => {
    frameCache.clear();
    void showFrame(playback.frame);
  });
  $("upres-run").addEventListener("click", () => void upresPreview());
  $("spec-load").addEventListener("click", () => {
    try {
      const body = editSpecFromText(($("spec-text") as unknown as HTMLElement).textContent ?? "");
      toast(`loaded edit spec with r=${body.weights.length}`);
    } catch (err) {
      reportError(err);
    }
  });

  setInterval(() => {
    if (playback.playing) {
      playback = tick(playback);
      syncTransport();
      void showFrame(playback.frame);
    }
  }, 120);

  await applyEdit(); // identity session to start
}

if (typeof document !== "undefined") {
  void start();
}
