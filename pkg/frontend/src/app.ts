/** Page assembly: store + controller + renderer wired to one root node. */
import type { ControllerOptions } from "./controller.js";
import { SessionController } from "./controller.js";
import { bindEvents, renderApp } from "./render.js";
import { Store } from "./store.js";

export interface App {
  store: Store;
  controller: SessionController;
  /** Resolves when the first session and plot responses have rendered. */
  ready: Promise<void>;
}

export function mount(root: HTMLElement, options: ControllerOptions = {}): App {
  const store = new Store();
  const controller = new SessionController(store, options);
  store.subscribe(() => renderApp(root, store));
  bindEvents(root, store, controller);
  renderApp(root, store);
  return { store, controller, ready: controller.boot() };
}
