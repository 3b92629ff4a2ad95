/** Dependency-free canvas line chart for the loss curves. */

import type { Metrics } from "./api.js";

export interface Bounds {
  min: number;
  max: number;
}

/** Positive, finite range of all series values; padded when degenerate. */
export function valueBounds(series: number[][]): Bounds {
  let min = Infinity;
  let max = -Infinity;
  for (const values of series) {
    for (const v of values) {
      if (Number.isFinite(v) && v > 0) {
        if (v < min) min = v;
        if (v > max) max = v;
      }
    }
  }
  if (min === Infinity) {
    return { min: 1e-6, max: 1 };
  }
  if (min === max) {
    return { min: min / 2, max: max * 2 };
  }
  return { min, max };
}

/** Map a series to canvas polyline points under a log-10 y scale.
 *  x spreads generations across the width; y=0 is the canvas top. */
export function scalePoints(
  values: number[],
  width: number,
  height: number,
  bounds: Bounds,
): Array<[number, number]> {
  const logMin = Math.log10(bounds.min);
  const logMax = Math.log10(bounds.max);
  const span = logMax - logMin || 1;
  const step = values.length > 1 ? width / (values.length - 1) : 0;
  const points: Array<[number, number]> = [];
  for (let i = 0; i < values.length; i++) {
    const v = values[i];
    const clamped = Math.min(Math.max(v, bounds.min), bounds.max);
    const yFrac = (Math.log10(clamped) - logMin) / span;
    points.push([i * step, height - yFrac * height]);
  }
  return points;
}

const SERIES: Array<{ key: "best_loss" | "median_loss"; color: string; label: string }> = [
  { key: "median_loss", color: "#e8a33d", label: "median" },
  { key: "best_loss", color: "#4d8fd1", label: "best" },
];

export function drawLossChart(canvas: HTMLCanvasElement, history: Metrics[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#14181d";
  ctx.fillRect(0, 0, width, height);
  if (history.length === 0) {
    ctx.fillStyle = "#8a93a0";
    ctx.font = "13px sans-serif";
    ctx.fillText("no generations yet", 12, 24);
    return;
  }
  const series = SERIES.map((s) => history.map((m) => m[s.key]));
  const bounds = valueBounds(series);
  const pad = 8;
  const innerW = width - pad * 2;
  const innerH = height - pad * 2;
  SERIES.forEach((spec, idx) => {
    const points = scalePoints(series[idx], innerW, innerH, bounds);
    ctx.strokeStyle = spec.color;
    ctx.lineWidth = 1.6;
    ctx.beginPath();
    points.forEach(([x, y], i) => {
      if (i === 0) ctx.moveTo(pad + x, pad + y);
      else ctx.lineTo(pad + x, pad + y);
    });
    ctx.stroke();
  });
  ctx.font = "11px sans-serif";
  SERIES.forEach((spec, idx) => {
    ctx.fillStyle = spec.color;
    ctx.fillText(spec.label, 12 + idx * 60, 14);
  });
}
