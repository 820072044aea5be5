/**
 * Mutation flows against the session service. At most one mutation is in
 * flight at a time; every success re-fetches session and plot data so the
 * page never renders state the server does not hold.
 */
import { ApiError, api as realApi, pollJob } from "./api.js";
import type { Api } from "./api.js";
import { phaseIndex } from "./colors.js";
import type { Store, Draft } from "./store.js";
import type { RecomputeRequest } from "./types.js";

export interface ControllerOptions {
  api?: Api;
  /** Pause before re-enabling actions after a server-side 409. */
  retryDelayMs?: number;
  /** Job poll interval. */
  pollIntervalMs?: number;
}

export function parseDraft(draft: Draft): RecomputeRequest {
  return {
    th: Number(draft.th),
    ot: Number(draft.ot),
    intensity_threshold: Number(draft.intensity_threshold),
    windows: Number(draft.windows),
  };
}

/** Client-side validation mirroring the service's parameter contract. */
export function validateRecompute(req: RecomputeRequest): string | null {
  if (!Number.isInteger(req.th) || req.th < 0)
    return "adjacency threshold must be an integer >= 0";
  if (!Number.isInteger(req.ot) || req.ot < 1)
    return "outlier threshold must be an integer >= 1";
  if (!Number.isInteger(req.windows) || req.windows < 1)
    return "window count must be an integer >= 1";
  if (!Number.isFinite(req.intensity_threshold) || req.intensity_threshold < 0)
    return "intensity threshold must be a number >= 0";
  return null;
}

export class SessionController {
  private readonly api: Api;
  private readonly retryDelayMs: number;
  private readonly pollIntervalMs: number;

  constructor(
    private readonly store: Store,
    options: ControllerOptions = {},
  ) {
    this.api = options.api ?? realApi;
    this.retryDelayMs = options.retryDelayMs ?? 2000;
    this.pollIntervalMs = options.pollIntervalMs ?? 250;
  }

  async refresh(): Promise<void> {
    const [session, plot] = await Promise.all([
      this.api.getSession(),
      this.api.getPlotData(),
    ]);
    this.store.setData({ session, plot });
  }

  async boot(): Promise<void> {
    try {
      await this.refresh();
    } catch (err) {
      this.store.setBanner({ kind: "error", text: describe(err) });
    }
  }

  async merge(): Promise<void> {
    if (!this.store.mergeEnabled()) return;
    const ids = [...this.store.selected].sort(
      (a, b) => phaseIndex(a) - phaseIndex(b),
    );
    this.store.setBusy("merge");
    try {
      await this.api.mergePhases(ids);
      this.store.clearSelection();
      await this.refresh();
      this.store.setBanner(null);
      this.store.setBusy(null);
    } catch (err) {
      this.mutationFailed(err);
    }
  }

  async undo(): Promise<void> {
    if (!this.store.undoEnabled()) return;
    this.store.setBusy("undo");
    try {
      await this.api.undoLast();
      await this.refresh();
      this.store.setBanner(null);
      this.store.setBusy(null);
    } catch (err) {
      this.mutationFailed(err);
    }
  }

  async recompute(req: RecomputeRequest): Promise<void> {
    if (!this.store.actionsEnabled()) return;
    const invalid = validateRecompute(req);
    if (invalid) {
      this.store.setParamError(invalid);
      return;
    }
    this.store.setParamError(null);
    this.store.setBusy("recompute");
    this.store.setBanner({ kind: "progress", text: "Recompute queued" });
    try {
      const job = await this.api.startRecompute(req);
      await pollJob(job.id, this.api.getJob, this.pollIntervalMs, (j) =>
        this.store.setBanner({ kind: "progress", text: `Recompute ${j.status}` }),
      );
      await this.refresh();
      this.store.setBanner(null);
      this.store.setBusy(null);
    } catch (err) {
      if (err instanceof ApiError && err.status === 400) {
        // parameter problem the server caught first; show it in the drawer
        this.store.setBanner(null);
        this.store.setParamError(err.message);
        this.store.setBusy(null);
      } else {
        this.mutationFailed(err);
      }
    }
  }

  private mutationFailed(err: unknown): void {
    if (err instanceof ApiError && err.status === 409) {
      this.serverBusy();
      return;
    }
    this.store.setBanner({ kind: "error", text: describe(err) });
    this.store.setBusy(null);
  }

  /** Another client started a recompute: pause, then pick up fresh state. */
  private serverBusy(): void {
    this.store.setBusy("server");
    this.store.setBanner({
      kind: "progress",
      text: "A recompute is running on the server; actions are paused.",
    });
    setTimeout(async () => {
      try {
        await this.refresh();
      } catch {
        // the next interaction will surface connection problems
      }
      this.store.setBanner(null);
      this.store.setBusy(null);
    }, this.retryDelayMs);
  }
}

function describe(err: unknown): string {
  if (err instanceof Error) return err.message;
  return String(err);
}
