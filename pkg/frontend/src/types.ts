// Shared shapes for the editor. Everything here mirrors the server's
// JSON and binary contracts; the client never derives physics on its own.

export interface EigenInfo {
  re: number;
  im: number;
  modulus: number;
  freq: number; // Im(Omega) = arg(lambda) / dt
}

export interface GridInfo {
  kind: "grid" | "none";
  nx?: number;
  ny?: number;
  h?: number;
  boundary?: string;
}

export interface ClusterInfo {
  threshold: number;
  low: number[];
  high: number[];
}

export interface ModelInfo {
  n: number;
  r: number;
  dt: number;
  grid: GridInfo;
  eigenvalues: EigenInfo[];
  clusters: ClusterInfo;
}

// One slider bank per cluster; conjugate pairs always move together
// because the expansion assigns by cluster membership, and partners
// share a cluster by construction.
export interface ClusterSliders {
  weight: number;
  growth: number;
  freq: number;
}

export interface EditState {
  threshold: number;
  low: ClusterSliders;
  high: ClusterSliders;
}

export interface EditSpecBody {
  weights: number[];
  growth_scale: number[];
  freq_scale: number[];
  cluster_threshold: number;
  start_frame?: number;
}

export interface FramePayload {
  nx: number;
  ny: number;
  channels: number;
  // raster payloads carry bytes, bin payloads carry floats
  bytes: Uint8Array | null;
  floats: Float32Array | null;
}

export interface ForceRequest {
  x: number;
  y: number;
  dx: number;
  dy: number;
  radius: number;
  scale: number;
}
