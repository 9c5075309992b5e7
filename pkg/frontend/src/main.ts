/** Annotation tool wiring: demo list, playback, click editing, preview
 * overlay, save. Shortcuts: space = play/pause, w = waypoint click,
 * d (hold) = dense span, arrows = step. */

import { ApiClient, ApiError, type Preview } from "./api.js";
import {
  afterSave,
  initialState,
  isDirty,
  loadedState,
  markDense,
  overlayFromPreview,
  setFrame,
  toggleClick,
  type OverlayModel,
  type TimelineState,
} from "./state.js";
import { drawScene, drawTimeline } from "./renderer.js";
import type { DemoDetail } from "./api.js";

const api = new ApiClient("");

const sceneCanvas = document.getElementById("scene") as HTMLCanvasElement;
const timelineCanvas = document.getElementById("timeline") as HTMLCanvasElement;
const demoSelect = document.getElementById("demo-select") as HTMLSelectElement;
const scrubber = document.getElementById("scrubber") as HTMLInputElement;
const playButton = document.getElementById("play") as HTMLButtonElement;
const saveButton = document.getElementById("save") as HTMLButtonElement;
const statusBar = document.getElementById("status") as HTMLElement;
const banner = document.getElementById("banner") as HTMLElement;

let state: TimelineState = initialState();
let detail: DemoDetail | null = null;
let overlay: OverlayModel | null = null;
let denseAnchor: number | null = null;
let lastTick = 0;

function showBanner(message: string): void {
  banner.textContent = message;
  banner.classList.toggle("hidden", message === "");
}

function status(): void {
  const dirty = isDirty(state) ? " (unsaved edits)" : "";
  statusBar.textContent = state.demoId
    ? `${state.demoId}  frame ${state.frame + 1}/${state.length}` +
      `  v${state.version}${dirty}`
    : "no demo loaded";
  saveButton.disabled = !isDirty(state);
}

function redraw(): void {
  if (detail) drawScene(sceneCanvas, detail.frames[state.frame]);
  drawTimeline(timelineCanvas, state.length, state.buffer, overlay,
    state.frame);
  scrubber.max = String(Math.max(state.length - 1, 0));
  scrubber.value = String(state.frame);
  playButton.textContent = state.playing ? "pause" : "play";
  status();
}

async function refreshOverlay(): Promise<void> {
  if (!state.demoId) return;
  try {
    const preview: Preview = await api.preview(state.demoId, state.buffer);
    overlay = overlayFromPreview(preview);
    showBanner("");
  } catch (err) {
    overlay = null;
    showBanner(`preview failed: ${(err as Error).message}`);
  }
  redraw();
}

export async function loadDemo(id: string): Promise<void> {
  try {
    detail = await api.getDemo(id);
    state = loadedState(detail);
    showBanner("");
    await refreshOverlay();
  } catch (err) {
    showBanner(`load failed: ${(err as Error).message}`);
  }
  redraw();
}

async function save(): Promise<void> {
  if (!state.demoId || !isDirty(state)) return;
  try {
    const res = await api.putClicks(state.demoId, state.buffer);
    state = afterSave(state, res.version);
    showBanner("");
  } catch (err) {
    if (err instanceof ApiError) showBanner(`save rejected: ${err.message}`);
    else showBanner(`save failed: ${(err as Error).message}`);
  }
  redraw();
}

function tick(now: number): void {
  if (state.playing && detail) {
    const interval = (state.dt * 1000) / state.rate;
    if (now - lastTick >= interval) {
      lastTick = now;
      const next = state.frame + 1;
      if (next >= state.length) {
        state = { ...state, playing: false };
      } else {
        state = setFrame(state, next);
        if (denseAnchor !== null) {
          state = markDense(state, denseAnchor, state.frame);
          void refreshOverlay();
        }
      }
      redraw();
    }
  }
  requestAnimationFrame(tick);
}

function onKey(ev: KeyboardEvent): void {
  if (!detail) return;
  if (ev.code === "Space") {
    ev.preventDefault();
    state = { ...state, playing: !state.playing };
  } else if (ev.key === "w") {
    state = toggleClick(state, state.frame);
    void refreshOverlay();
  } else if (ev.key === "d" && denseAnchor === null) {
    denseAnchor = state.frame;
    state = markDense(state, state.frame, state.frame);
    void refreshOverlay();
  } else if (ev.key === "ArrowRight") {
    state = setFrame(state, state.frame + 1);
    if (denseAnchor !== null) state = markDense(state, denseAnchor, state.frame);
  } else if (ev.key === "ArrowLeft") {
    state = setFrame(state, state.frame - 1);
  } else if (ev.key === "s") {
    void save();
  }
  redraw();
}

function onKeyUp(ev: KeyboardEvent): void {
  if (ev.key === "d") denseAnchor = null;
}

async function init(): Promise<void> {
  try {
    const demos = await api.listDemos();
    demoSelect.innerHTML = "";
    for (const d of demos) {
      const opt = document.createElement("option");
      opt.value = d.id;
      opt.textContent = `${d.id} (${d.length} frames` +
        `${d.has_clicks ? ", clicked" : ""})`;
      demoSelect.appendChild(opt);
    }
    if (demos.length > 0) await loadDemo(demos[0].id);
  } catch (err) {
    showBanner(`cannot reach service: ${(err as Error).message}`);
  }
  redraw();
}

demoSelect.addEventListener("change", () => void loadDemo(demoSelect.value));
scrubber.addEventListener("input", () => {
  state = setFrame(state, Number(scrubber.value));
  if (denseAnchor !== null) state = markDense(state, denseAnchor, state.frame);
  redraw();
});
playButton.addEventListener("click", () => {
  state = { ...state, playing: !state.playing };
  redraw();
});
saveButton.addEventListener("click", () => void save());
window.addEventListener("keydown", onKey);
window.addEventListener("keyup", onKeyUp);

requestAnimationFrame(tick);
void init();
