/** Phase color assignment, shared convention with the server's plots. */

export const PALETTE = [
  "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
  "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5",
  "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
] as const;

export const OUTLIER_COLOR = "#bbbbbb";

/** Numeric part of a phase id like "P12". */
export function phaseIndex(id: string): number {
  const m = /^P(\d+)$/.exec(id);
  if (!m) throw new Error(`malformed phase id: ${id}`);
  return Number(m[1]);
}

/**
 * Color for a phase id. Keyed to the id itself, never to a list position,
 * so surviving phases keep their color when a merge removes another one.
 */
export function colorFor(id: string): string {
  return PALETTE[phaseIndex(id) % PALETTE.length]!;
}
