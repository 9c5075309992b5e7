/** Canvas drawing for the planar scene and the timeline strip. */

import type { Frame, Primitive } from "./api.js";
import { MODE_COLORS, type OverlayModel } from "./state.js";

const WORKSPACE_MARGIN = 14;

function toCanvas(
  canvas: HTMLCanvasElement,
  x: number,
  y: number,
): [number, number] {
  const size = Math.min(canvas.width, canvas.height) - 2 * WORKSPACE_MARGIN;
  // workspace y grows upward; canvas y grows downward
  return [WORKSPACE_MARGIN + x * size, WORKSPACE_MARGIN + (1 - y) * size];
}

function scale(canvas: HTMLCanvasElement, v: number): number {
  return v * (Math.min(canvas.width, canvas.height) - 2 * WORKSPACE_MARGIN);
}

function drawSquare(
  ctx: CanvasRenderingContext2D,
  canvas: HTMLCanvasElement,
  p: Primitive,
  fill: boolean,
  color: string,
): void {
  const [cx, cy] = toCanvas(canvas, p.x, p.y);
  const half = scale(canvas, p.size) / 2;
  ctx.save();
  ctx.translate(cx, cy);
  ctx.rotate(-p.theta);
  ctx.beginPath();
  ctx.rect(-half, -half, 2 * half, 2 * half);
  if (fill) {
    ctx.fillStyle = color;
    ctx.fill();
  }
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.stroke();
  ctx.restore();
}

function drawGripper(
  ctx: CanvasRenderingContext2D,
  canvas: HTMLCanvasElement,
  p: Primitive,
): void {
  const [cx, cy] = toCanvas(canvas, p.x, p.y);
  const r = scale(canvas, p.size);
  ctx.save();
  ctx.translate(cx, cy);
  ctx.rotate(-p.theta);
  ctx.beginPath();
  ctx.moveTo(r, 0);
  ctx.lineTo(-r * 0.5, r * 0.5);
  ctx.lineTo(-r * 0.5, -r * 0.5);
  ctx.closePath();
  const closed = (p.grip ?? 0) >= 0.5;
  ctx.fillStyle = closed ? "#444" : "#999";
  ctx.fill();
  ctx.strokeStyle = "#111";
  ctx.stroke();
  ctx.restore();
}

export function drawScene(canvas: HTMLCanvasElement, frame: Frame): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const [x0, y0] = toCanvas(canvas, 0, 1);
  const side = scale(canvas, 1);
  ctx.strokeStyle = "#ccc";
  ctx.strokeRect(x0, y0, side, side);
  for (const p of frame.primitives) {
    if (p.kind === "slot") drawSquare(ctx, canvas, p, false, "#1f77b4");
    else if (p.kind === "object") drawSquare(ctx, canvas, p, true, "#d62728");
    else drawGripper(ctx, canvas, p);
  }
}

/** Timeline strip: click marks, mode colors from the preview overlay, the
 * playhead, and waypoint markers. */
export function drawTimeline(
  canvas: HTMLCanvasElement,
  length: number,
  buffer: boolean[],
  overlay: OverlayModel | null,
  playhead: number,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx || length === 0) return;
  const w = canvas.width;
  const h = canvas.height;
  ctx.clearRect(0, 0, w, h);
  const cell = w / length;
  if (overlay) {
    for (let t = 0; t < Math.min(length, overlay.colors.length); t++) {
      ctx.fillStyle = MODE_COLORS[overlay.colors[t]];
      ctx.fillRect(t * cell, h * 0.45, Math.ceil(cell), h * 0.3);
    }
    ctx.fillStyle = "#000";
    for (const t of overlay.waypointFrames) {
      ctx.beginPath();
      ctx.arc((t + 0.5) * cell, h * 0.85, 3, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
  ctx.fillStyle = "#333";
  for (let t = 0; t < length; t++) {
    if (buffer[t]) ctx.fillRect(t * cell, h * 0.1, Math.max(cell, 1), h * 0.25);
  }
  ctx.strokeStyle = "#e11";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo((playhead + 0.5) * cell, 0);
  ctx.lineTo((playhead + 0.5) * cell, h);
  ctx.stroke();
}
