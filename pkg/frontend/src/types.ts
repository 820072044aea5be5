/** Message shapes of the session service's JSON routes. */

export interface PhaseSummary {
  id: string;
  peak_count: number;
  member_count: number;
  representative: number[];
}

export interface SessionPayload {
  params: Record<string, unknown>;
  width: number | null;
  lineage_length: number;
  n_samples: number;
  n_outliers: number;
  n_mixed: number;
  phases: PhaseSummary[];
}

export interface PlotPhase {
  id: string;
  index: number;
  color: string;
  peaks: number[];
  peak_count: number;
  member_count: number;
}

export interface PlotSample {
  id: string;
  x_mm: number;
  y_mm: number;
  ternary: number[];
  composition: number[];
  phases: string[];
  outlier: boolean;
}

export interface PlotData {
  width: number | null;
  params: Record<string, unknown>;
  lineage_length: number;
  phases: PlotPhase[];
  samples: PlotSample[];
}

export type JobState = "queued" | "running" | "done" | "error";

export interface JobStatus {
  id: string;
  status: JobState;
  error: string | null;
  params: Record<string, unknown>;
}

export interface RecomputeRequest {
  th: number;
  ot: number;
  intensity_threshold: number;
  windows: number;
}
