/**
 * End-to-end session against the real annotation service: load a demo,
 * enter a click pattern through the state-layer edits, save, and check that
 * the stored dataset and the preview overlay match the service's own
 * segmentation pipeline.
 *
 * Requires python3 with the backend package installed (the repo root's
 * editable install); skipped when spawning the service fails.
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { ApiClient } from "../src/api.js";
import {
  isDirty,
  loadedState,
  markDense,
  overlayFromPreview,
  toggleClick,
  afterSave,
} from "../src/state.js";

const PORT = 8901;
const BASE = `http://127.0.0.1:${PORT}`;
const CLICK_PATTERN = [0, 0, 0, 1, 0, 0, 1, 1, 1, 0].map((c) => c === 1);

let proc: ChildProcess | null = null;
let dataDir = "";
let available = false;

function python(code: string): string {
  return execFileSync("python3", ["-c", code], { encoding: "utf-8" });
}

async function waitForService(): Promise<boolean> {
  for (let i = 0; i < 50; i++) {
    try {
      const res = await fetch(`${BASE}/demos`);
      if (res.ok) return true;
    } catch {
      /* not up yet */
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  return false;
}

beforeAll(async () => {
  dataDir = mkdtempSync(join(tmpdir(), "annotate-ui-"));
  try {
    python(`
from hybridil.pipeline import generate_dataset
from hybridil.sim import EnvConfig
from hybridil.trajectory import save_dataset
ds = generate_dataset(EnvConfig(), 1, base_seed=3)
ds.demos[0] = ds.demos[0].with_clicks([False] * len(ds.demos[0].steps))
save_dataset(ds, ${JSON.stringify(dataDir)})
`);
    proc = spawn("python3", [
      "-c",
      `from hybridil.service import serve; serve(${JSON.stringify(dataDir)}, port=${PORT})`,
    ], { stdio: "ignore" });
    available = await waitForService();
  } catch {
    available = false;
  }
}, 30000);

afterAll(() => {
  proc?.kill();
  if (dataDir) rmSync(dataDir, { recursive: true, force: true });
});

describe("annotation session round trip", () => {
  it("labels, saves, and matches the scripted pipeline byte for byte", async () => {
    expect(available, "annotation service failed to start").toBe(true);
    const api = new ApiClient(BASE);
    const demos = await api.listDemos();
    expect(demos).toHaveLength(1);
    const id = demos[0].id;

    // --- load
    const detail = await api.getDemo(id);
    let state = loadedState(detail);
    expect(isDirty(state)).toBe(false);

    // --- enter the click pattern on the first ten frames:
    // isolated waypoint click at 3, dense span on [6, 8]
    state = toggleClick(state, 3);
    state = markDense(state, 6, 8);
    expect(isDirty(state)).toBe(true);
    for (let t = 0; t < CLICK_PATTERN.length; t++) {
      expect(state.buffer[t]).toBe(CLICK_PATTERN[t]);
    }

    // --- overlay comes from the service preview, never computed locally
    const preview = await api.preview(id, state.buffer);
    const overlay = overlayFromPreview(preview);
    expect(preview.modes.slice(0, 10)).toEqual(
      [0, 0, 0, 0, 0, 0, 1, 1, 1, 0],
    );
    expect(overlay.colors.slice(0, 10)).toEqual([
      "sparse", "sparse", "sparse", "sparse", "sparse", "sparse",
      "dense", "dense", "dense", "sparse",
    ]);

    // --- save, then reload: read-your-writes
    const res = await api.putClicks(id, state.buffer);
    state = afterSave(state, res.version);
    expect(isDirty(state)).toBe(false);
    const reloaded = await api.getDemo(id);
    expect(reloaded.frames.map((f) => f.click)).toEqual(state.buffer);
    expect(reloaded.version).toBe(res.version);

    // --- the stored dataset, processed, is byte-identical to the scripted
    // pipeline applied to the same click pattern
    const out = python(`
import json
from hybridil.pipeline import process_dataset
from hybridil.trajectory import load_dataset
from hybridil.segmentation import label_modes

ds = load_dataset(${JSON.stringify(dataDir)})
demo = ds.demos[0]
ui_labels = process_dataset(ds).labeled[0]

scripted = demo.with_clicks(demo.clicks)  # clicks as saved by the UI
ref_labels = process_dataset(
    type(ds)(demos=[scripted]), relabel=True).labeled[0]
print(json.dumps({
    "equal": ui_labels == ref_labels,
    "modes": [ls.mode for ls in ui_labels][:10],
}))
`);
    const verdict = JSON.parse(out.trim());
    expect(verdict.equal).toBe(true);
    expect(verdict.modes).toEqual(preview.modes.slice(0, 10));

    // --- preview of the saved state equals the stored-click preview
    const storedPreview = await api.preview(id);
    expect(storedPreview).toEqual(preview);
  }, 30000);
});
