/** Timeline state and the pure click-buffer edits.
 *
 * The UI never computes segmentation itself: the overlay model is derived
 * only from the service's preview response.
 */

import type { DemoDetail, Preview } from "./api.js";

export interface TimelineState {
  demoId: string | null;
  frame: number;
  playing: boolean;
  rate: number; // playback rate multiplier (1 = native 10 fps)
  length: number;
  dt: number;
  buffer: boolean[]; // local click edits
  saved: boolean[]; // last known server state
  version: number;
}

export function initialState(): TimelineState {
  return {
    demoId: null,
    frame: 0,
    playing: false,
    rate: 1,
    length: 0,
    dt: 0.1,
    buffer: [],
    saved: [],
    version: 0,
  };
}

export function loadedState(detail: DemoDetail): TimelineState {
  const clicks = detail.frames.map((f) => f.click);
  return {
    demoId: detail.id,
    frame: 0,
    playing: false,
    rate: 1,
    length: detail.length,
    dt: detail.dt,
    buffer: [...clicks],
    saved: [...clicks],
    version: detail.version,
  };
}

export function isDirty(state: TimelineState): boolean {
  if (state.buffer.length !== state.saved.length) return true;
  return state.buffer.some((c, i) => c !== state.saved[i]);
}

function inBounds(state: TimelineState, frame: number): boolean {
  return Number.isInteger(frame) && frame >= 0 && frame < state.length;
}

/** Single-frame waypoint toggle; toggling twice restores the buffer. */
export function toggleClick(state: TimelineState, frame: number): TimelineState {
  if (!inBounds(state, frame)) return state;
  const buffer = [...state.buffer];
  buffer[frame] = !buffer[frame];
  return { ...state, buffer };
}

/** Fill a dense span [start, end] inclusive with clicks. */
export function markDense(
  state: TimelineState,
  start: number,
  end: number,
): TimelineState {
  const lo = Math.min(start, end);
  const hi = Math.max(start, end);
  if (!inBounds(state, lo) || !inBounds(state, hi)) return state;
  const buffer = [...state.buffer];
  for (let t = lo; t <= hi; t++) buffer[t] = true;
  return { ...state, buffer };
}

/** Clear clicks on [start, end] inclusive (eraser for mislabeled spans). */
export function clearSpan(
  state: TimelineState,
  start: number,
  end: number,
): TimelineState {
  const lo = Math.min(start, end);
  const hi = Math.max(start, end);
  if (!inBounds(state, lo) || !inBounds(state, hi)) return state;
  const buffer = [...state.buffer];
  for (let t = lo; t <= hi; t++) buffer[t] = false;
  return { ...state, buffer };
}

export function setFrame(state: TimelineState, frame: number): TimelineState {
  const clamped = Math.max(0, Math.min(state.length - 1, Math.round(frame)));
  return { ...state, frame: clamped };
}

export function afterSave(state: TimelineState, version: number): TimelineState {
  return { ...state, saved: [...state.buffer], version };
}

/** Per-frame mode colors and waypoint markers, straight from the preview. */
export interface OverlayModel {
  colors: ("sparse" | "dense")[];
  waypointFrames: number[];
}

export const MODE_COLORS = { sparse: "#3cb371", dense: "#ff8c00" } as const;

export function overlayFromPreview(preview: Preview): OverlayModel {
  const colors = preview.modes.map((m) => (m === 1 ? "dense" : "sparse") as
    "sparse" | "dense");
  const waypointFrames = [...new Set(preview.waypoint_indices)].sort(
    (a, b) => a - b,
  );
  return { colors, waypointFrames };
}
