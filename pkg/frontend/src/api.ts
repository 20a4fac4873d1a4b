// Typed client for the model service. Thin fetch wrappers plus one
// typed error for the reversal-blocked case so the UI can degrade
// gracefully instead of toasting a generic failure.

import type {
  EditSpecBody,
  ForceRequest,
  FramePayload,
  ModelInfo,
} from "./types.js";
import { parseFramePayload } from "./raster.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ReversalBlockedError extends ApiError {
  constructor(
    message: string,
    readonly blockedModes: number[],
  ) {
    super(409, message);
  }
}

async function raiseFor(resp: Response): Promise<never> {
  let message = `${resp.status}`;
  let blocked: number[] | null = null;
  try {
    const body = (await resp.json()) as { error?: string; blocked_modes?: number[] };
    message = body.error ?? message;
    blocked = body.blocked_modes ?? null;
  } catch {
    // non-JSON diagnostics fall back to the status line
  }
  if (resp.status === 409 && blocked) {
    throw new ReversalBlockedError(message, blocked);
  }
  throw new ApiError(resp.status, message);
}

export class FlowClient {
  constructor(readonly base: string) {}

  async getModel(): Promise<ModelInfo> {
    const resp = await fetch(`${this.base}/api/model`);
    if (!resp.ok) await raiseFor(resp);
    return (await resp.json()) as ModelInfo;
  }

  async createSession(spec: Partial<EditSpecBody> = {}): Promise<string> {
    const resp = await fetch(`${this.base}/api/session`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(spec),
    });
    if (!resp.ok) await raiseFor(resp);
    const body = (await resp.json()) as { session_id: string };
    return body.session_id;
  }

  async getFrame(
    sessionId: string,
    k: number,
    field: "speed" | "velocity" | "density" = "speed",
    format: "bin" | "raster" = "raster",
  ): Promise<FramePayload> {
    const resp = await fetch(
      `${this.base}/api/session/${sessionId}/frame?k=${k}&field=${field}&format=${format}`,
    );
    if (!resp.ok) await raiseFor(resp);
    return parseFramePayload(await resp.arrayBuffer(), format);
  }

  async getFrameBytes(
    sessionId: string,
    k: number,
    field = "speed",
    format = "raster",
  ): Promise<ArrayBuffer> {
    const resp = await fetch(
      `${this.base}/api/session/${sessionId}/frame?k=${k}&field=${field}&format=${format}`,
    );
    if (!resp.ok) await raiseFor(resp);
    return resp.arrayBuffer();
  }

  async postForce(sessionId: string, force: ForceRequest): Promise<number> {
    const resp = await fetch(`${this.base}/api/session/${sessionId}/force`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(force),
    });
    if (!resp.ok) await raiseFor(resp);
    const body = (await resp.json()) as { frame: number };
    return body.frame;
  }

  async postUpres(
    sessionId: string,
    low: number[],
    factor: number,
    split: number,
    project: boolean,
  ): Promise<FramePayload> {
    const resp = await fetch(`${this.base}/api/session/${sessionId}/upres`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ low, factor, split, project, format: "raster" }),
    });
    if (!resp.ok) await raiseFor(resp);
    return parseFramePayload(await resp.arrayBuffer(), "raster");
  }

  async deleteSession(sessionId: string): Promise<void> {
    const resp = await fetch(`${this.base}/api/session/${sessionId}`, {
      method: "DELETE",
    });
    if (!resp.ok) await raiseFor(resp);
  }
}
