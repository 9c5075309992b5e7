import { describe, expect, it } from "vitest";

import type { DemoDetail, Preview } from "../src/api.js";
import {
  afterSave,
  initialState,
  isDirty,
  loadedState,
  markDense,
  overlayFromPreview,
  setFrame,
  toggleClick,
} from "../src/state.js";

function detailWith(clicks: boolean[]): DemoDetail {
  return {
    id: "demo_x",
    dt: 0.1,
    length: clicks.length,
    version: 3,
    frames: clicks.map((click, index) => ({
      index,
      click,
      proprio: { x: 0.5, y: 0.5, theta: 0, grip: 0 },
      primitives: [],
    })),
  };
}

describe("timeline state", () => {
  it("loads buffer from the server clicks and starts clean", () => {
    const s = loadedState(detailWith([false, true, false]));
    expect(s.buffer).toEqual([false, true, false]);
    expect(s.version).toBe(3);
    expect(isDirty(s)).toBe(false);
  });

  it("toggle is an involution", () => {
    const s0 = loadedState(detailWith([false, false, false]));
    const s1 = toggleClick(s0, 1);
    expect(s1.buffer).toEqual([false, true, false]);
    expect(isDirty(s1)).toBe(true);
    const s2 = toggleClick(s1, 1);
    expect(s2.buffer).toEqual(s0.buffer);
    expect(isDirty(s2)).toBe(false);
  });

  it("markDense fills the inclusive range", () => {
    const s0 = loadedState(detailWith(new Array(9).fill(false)));
    const s1 = markDense(s0, 6, 8);
    expect(s1.buffer.map((c) => (c ? 1 : 0))).toEqual(
      [0, 0, 0, 0, 0, 0, 1, 1, 1],
    );
  });

  it("ignores out-of-range edits", () => {
    const s0 = loadedState(detailWith([false, false]));
    expect(toggleClick(s0, 7)).toBe(s0);
    expect(markDense(s0, -1, 1)).toBe(s0);
    expect(toggleClick(s0, -1)).toBe(s0);
  });

  it("clamps the playhead", () => {
    const s0 = loadedState(detailWith(new Array(5).fill(false)));
    expect(setFrame(s0, 99).frame).toBe(4);
    expect(setFrame(s0, -2).frame).toBe(0);
  });

  it("afterSave records the server state and version", () => {
    let s = loadedState(detailWith([false, false]));
    s = toggleClick(s, 0);
    expect(isDirty(s)).toBe(true);
    s = afterSave(s, 4);
    expect(isDirty(s)).toBe(false);
    expect(s.version).toBe(4);
  });

  it("does not mark dirty on an empty initial state", () => {
    expect(isDirty(initialState())).toBe(false);
  });
});

describe("overlay model", () => {
  it("is derived only from the preview response", () => {
    const preview: Preview = {
      modes: [0, 0, 1, 1, 0],
      waypoint_indices: [2, 2, 3, 4, 4],
      segments: [
        { kind: "sparse", start: 0, end: 2, target: 2 },
        { kind: "dense", start: 2, end: 4, target: null },
        { kind: "sparse", start: 4, end: 5, target: 4 },
      ],
    };
    const overlay = overlayFromPreview(preview);
    expect(overlay.colors).toEqual(
      ["sparse", "sparse", "dense", "dense", "sparse"],
    );
    expect(overlay.waypointFrames).toEqual([2, 3, 4]);
  });
});
