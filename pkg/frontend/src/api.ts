/** Typed fetch wrappers for the session service. */
import type {
  JobStatus,
  PlotData,
  RecomputeRequest,
  SessionPayload,
} from "./types.js";

export const EXPORT_URL = "/api/export";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  if (!resp.ok) {
    let detail = `${resp.status} ${resp.statusText}`;
    try {
      const body = await resp.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body; keep the status line
    }
    throw new ApiError(resp.status, detail);
  }
  return resp.json() as Promise<T>;
}

function post<T>(url: string, body?: unknown): Promise<T> {
  return request<T>(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
}

export const getSession = (): Promise<SessionPayload> =>
  request("/api/session");

export const getPlotData = (): Promise<PlotData> => request("/api/plot-data");

export const mergePhases = (ids: string[]): Promise<SessionPayload> =>
  post("/api/merge", { ids });

export const undoLast = (): Promise<SessionPayload> => post("/api/undo");

export const startRecompute = (req: RecomputeRequest): Promise<JobStatus> =>
  post("/api/recompute", req);

export const getJob = (id: string): Promise<JobStatus> =>
  request(`/api/job/${id}`);

export interface Api {
  getSession: typeof getSession;
  getPlotData: typeof getPlotData;
  mergePhases: typeof mergePhases;
  undoLast: typeof undoLast;
  startRecompute: typeof startRecompute;
  getJob: typeof getJob;
}

export const api: Api = {
  getSession,
  getPlotData,
  mergePhases,
  undoLast,
  startRecompute,
  getJob,
};

/**
 * Poll a job until it reaches a terminal state. Resolves with the final
 * status on "done", rejects with the job's error message on "error".
 */
export function pollJob(
  id: string,
  fetchJob: (id: string) => Promise<JobStatus> = getJob,
  intervalMs = 250,
  onProgress?: (job: JobStatus) => void,
): Promise<JobStatus> {
  return new Promise((resolve, reject) => {
    const poll = setInterval(async () => {
      try {
        const job = await fetchJob(id);
        if (job.status === "done") {
          clearInterval(poll);
          resolve(job);
        } else if (job.status === "error") {
          clearInterval(poll);
          reject(new Error(job.error ?? "recompute failed"));
        } else if (onProgress) {
          onProgress(job);
        }
      } catch (err) {
        clearInterval(poll);
        reject(err);
      }
    }, intervalMs);
  });
}
