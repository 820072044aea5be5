/** DOM rendering and event wiring. Renders are full rebuilds from the
 * store; hover highlighting only toggles classes so it never re-renders. */
import { EXPORT_URL } from "./api.js";
import { buildPhaseList, buildTernarySvg, buildWaferSvg, esc } from "./layout.js";
import type { SessionController } from "./controller.js";
import { parseDraft } from "./controller.js";
import type { Store, Draft } from "./store.js";

function toolbar(store: Store): string {
  const enabled = store.actionsEnabled();
  const dis = (ok: boolean): string => (ok ? "" : " disabled");
  return (
    '<div class="toolbar">' +
    `<button id="merge-btn"${dis(store.mergeEnabled())}>Merge selected (${store.selected.size})</button>` +
    `<button id="undo-btn"${dis(store.undoEnabled())}>Undo</button>` +
    `<a id="export-link" href="${EXPORT_URL}" download="result.json"${enabled ? "" : ' aria-disabled="true" tabindex="-1"'}>Export</a>` +
    `<button id="drawer-btn"${dis(enabled)}>Parameters</button>` +
    "</div>"
  );
}

function banner(store: Store): string {
  if (!store.banner) return '<div id="banner" hidden></div>';
  const { kind, text } = store.banner;
  return `<div id="banner" class="banner ${kind}">${esc(text)}</div>`;
}

function drawer(store: Store): string {
  if (!store.drawerOpen || !store.draft) return "";
  const d = store.draft;
  const field = (key: keyof Draft, label: string): string =>
    '<label class="param">' +
    `<span>${label}</span>` +
    `<input name="${key}" value="${esc(d[key])}" inputmode="decimal">` +
    "</label>";
  const error = store.paramError
    ? `<p id="param-error" class="error">${esc(store.paramError)}</p>`
    : '<p id="param-error" hidden></p>';
  return (
    '<section id="drawer">' +
    field("th", "Peak adjacency (windows)") +
    field("ot", "Min members per phase") +
    field("intensity_threshold", "Intensity threshold") +
    field("windows", "Window count") +
    `<button id="apply-btn"${store.actionsEnabled() ? "" : " disabled"}>Recompute</button>` +
    error +
    "</section>"
  );
}

function statusLine(store: Store): string {
  const s = store.data?.session;
  if (!s) return '<footer id="status">Connecting to the session service…</footer>';
  return (
    '<footer id="status">' +
    `${s.n_samples} samples · ${s.phases.length} phases · ` +
    `${s.n_mixed} mixed · ${s.n_outliers} outliers · ` +
    `${s.lineage_length} merges applied` +
    "</footer>"
  );
}

export function renderApp(root: HTMLElement, store: Store): void {
  const plot = store.data?.plot;
  const panels = plot
    ? '<main class="panels">' +
      `<figure id="wafer-panel"><figcaption>Wafer</figcaption>${buildWaferSvg(plot)}</figure>` +
      `<figure id="ternary-panel"><figcaption>Composition</figcaption>${buildTernarySvg(plot)}</figure>` +
      `<section id="phase-panel" role="listbox" aria-label="Phases" aria-multiselectable="true">` +
      `<h2>Phases</h2>${buildPhaseList(plot, store.selected)}</section>` +
      "</main>"
    : "";
  root.innerHTML =
    "<header><h1>Phase map session</h1>" +
    toolbar(store) +
    banner(store) +
    "</header>" +
    drawer(store) +
    panels +
    statusLine(store);
}

function clearHighlight(root: HTMLElement): void {
  for (const el of root.querySelectorAll(".hl")) el.classList.remove("hl");
}

function highlightSample(root: HTMLElement, sid: string, phases: string[]): void {
  clearHighlight(root);
  for (const el of root.querySelectorAll(`[data-sample-id="${sid}"]`))
    el.classList.add("hl");
  for (const pid of phases)
    for (const el of root.querySelectorAll(`[data-phase-id="${pid}"]`))
      el.classList.add("hl");
}

function highlightPhase(root: HTMLElement, pid: string): void {
  clearHighlight(root);
  for (const el of root.querySelectorAll(`[data-phase-id="${pid}"]`))
    el.classList.add("hl");
  for (const el of root.querySelectorAll(`[data-phases~="${pid}"]`))
    el.classList.add("hl");
}

export function bindEvents(
  root: HTMLElement,
  store: Store,
  controller: SessionController,
): void {
  root.addEventListener("click", (ev) => {
    const target = ev.target as Element;
    const row = target.closest("[data-phase-id]");
    if (row) {
      store.toggleSelected(row.getAttribute("data-phase-id")!);
      return;
    }
    switch (target.closest("button, a")?.id) {
      case "merge-btn":
        void controller.merge();
        break;
      case "undo-btn":
        void controller.undo();
        break;
      case "drawer-btn":
        store.toggleDrawer();
        break;
      case "apply-btn":
        if (store.draft) void controller.recompute(parseDraft(store.draft));
        break;
    }
  });

  root.addEventListener("input", (ev) => {
    const input = ev.target as HTMLInputElement;
    if (input.tagName === "INPUT" && input.name)
      store.editDraft(input.name as keyof Draft, input.value);
  });

  root.addEventListener("mouseover", (ev) => {
    const target = ev.target as Element;
    const marker = target.closest("[data-sample-id]");
    if (marker) {
      highlightSample(
        root,
        marker.getAttribute("data-sample-id")!,
        (marker.getAttribute("data-phases") ?? "").split(" ").filter(Boolean),
      );
      return;
    }
    const row = target.closest("[data-phase-id]");
    if (row) highlightPhase(root, row.getAttribute("data-phase-id")!);
  });

  root.addEventListener("mouseout", () => clearHighlight(root));
}
