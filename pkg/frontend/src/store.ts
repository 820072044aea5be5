/**
 * View-model for the page. Holds the latest server responses plus
 * ephemeral interaction state (selection, banner, drawer); the server
 * data is never edited locally, only replaced by fresh responses.
 */
import type { PlotData, SessionPayload } from "./types.js";

export interface AppData {
  session: SessionPayload;
  plot: PlotData;
}

export interface Banner {
  kind: "info" | "error" | "progress";
  text: string;
}

export type BusyReason = "merge" | "undo" | "recompute" | "server" | null;

export interface Draft {
  th: string;
  ot: string;
  intensity_threshold: string;
  windows: string;
}

export class Store {
  data: AppData | null = null;
  selected = new Set<string>();
  busy: BusyReason = null;
  banner: Banner | null = null;
  drawerOpen = false;
  draft: Draft | null = null;
  paramError: string | null = null;

  private listeners: (() => void)[] = [];

  subscribe(fn: () => void): void {
    this.listeners.push(fn);
  }

  notify(): void {
    for (const fn of this.listeners) fn();
  }

  /** Replace the server data; selection keeps only surviving phases. */
  setData(data: AppData): void {
    this.data = data;
    const alive = new Set(data.plot.phases.map((p) => p.id));
    this.selected = new Set([...this.selected].filter((id) => alive.has(id)));
    this.notify();
  }

  toggleSelected(id: string): void {
    if (this.selected.has(id)) this.selected.delete(id);
    else this.selected.add(id);
    this.notify();
  }

  clearSelection(): void {
    this.selected.clear();
    this.notify();
  }

  setBusy(reason: BusyReason): void {
    this.busy = reason;
    this.notify();
  }

  setBanner(banner: Banner | null): void {
    this.banner = banner;
    this.notify();
  }

  setParamError(error: string | null): void {
    this.paramError = error;
    this.notify();
  }

  /** Open/close the parameter drawer; opening seeds the draft from live params. */
  toggleDrawer(): void {
    this.drawerOpen = !this.drawerOpen;
    if (this.drawerOpen) this.draft = this.seedDraft();
    this.notify();
  }

  private seedDraft(): Draft {
    const params = this.data?.session.params ?? {};
    const binar = (params["binarization"] ?? {}) as Record<string, unknown>;
    const str = (v: unknown, fallback: string): string =>
      typeof v === "number" ? String(v) : fallback;
    return {
      th: str(params["th"], "1"),
      ot: str(params["ot"], "5"),
      intensity_threshold: str(binar["intensity_threshold"], "30"),
      windows: str(binar["window_count"], "100"),
    };
  }

  /** Field edits update the draft silently; the inputs already show the text. */
  editDraft(field: keyof Draft, value: string): void {
    if (this.draft) this.draft[field] = value;
  }

  actionsEnabled(): boolean {
    return this.busy === null && this.data !== null;
  }

  mergeEnabled(): boolean {
    return this.actionsEnabled() && this.selected.size >= 2;
  }

  undoEnabled(): boolean {
    return this.actionsEnabled() && (this.data?.session.lineage_length ?? 0) > 0;
  }
}
