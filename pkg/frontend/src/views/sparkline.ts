/** Inline SVG mini-plots shared by the browser grid and top-K previews. */

import { escapeHtml } from "../format.js";
import type { AnomalyInterval, SeriesData } from "../types.js";

export const SPARK_W = 120;
export const SPARK_H = 32;

/** Map a series onto pixel coordinates; geometry only, values untouched. */
export function sparklinePoints(
  series: SeriesData,
  width = SPARK_W,
  height = SPARK_H,
): string {
  const { times, values } = series;
  if (values.length === 0) return "";
  const t0 = times[0]!;
  const t1 = times[times.length - 1]!;
  const tSpan = t1 - t0 || 1;
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  const vSpan = hi - lo || 1;
  const pts: string[] = [];
  for (let i = 0; i < values.length; i++) {
    const x = ((times[i]! - t0) / tSpan) * width;
    const y = height - ((values[i]! - lo) / vSpan) * height;
    pts.push(`${x.toFixed(1)},${y.toFixed(1)}`);
  }
  return pts.join(" ");
}

export function sparklineSvg(series: SeriesData, cssClass = "sparkline"): string {
  return (
    `<svg class="${cssClass}" viewBox="0 0 ${SPARK_W} ${SPARK_H}" ` +
    `preserveAspectRatio="none">` +
    `<polyline fill="none" points="${sparklinePoints(series)}"/>` +
    `</svg>`
  );
}

/**
 * Overlay plot of two series with optional anomaly interval shading.
 * Shaded rects carry the interval's raw start/end fields.
 */
export function overlaySvg(
  a: SeriesData,
  b: SeriesData,
  intervals: AnomalyInterval[],
  width = 560,
  height = 120,
): string {
  const all = { times: a.times, values: [...a.values, ...b.values] };
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of all.values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  const vSpan = hi - lo || 1;
  const t0 = Math.min(a.times[0] ?? 0, b.times[0] ?? 0);
  const t1 = Math.max(a.times[a.times.length - 1] ?? 1, b.times[b.times.length - 1] ?? 1);
  const tSpan = t1 - t0 || 1;

  const line = (s: SeriesData, cls: string) => {
    const pts: string[] = [];
    for (let i = 0; i < s.values.length; i++) {
      const x = ((s.times[i]! - t0) / tSpan) * width;
      const y = height - ((s.values[i]! - lo) / vSpan) * height;
      pts.push(`${x.toFixed(1)},${y.toFixed(1)}`);
    }
    return `<polyline class="${cls}" fill="none" points="${pts.join(" ")}"/>`;
  };

  const rects = intervals
    .map((iv) => {
      const x = ((iv.start_t - t0) / tSpan) * width;
      const w = ((iv.end_t - iv.start_t) / tSpan) * width;
      return (
        `<rect class="anomaly-shade" data-start="${escapeHtml(String(iv.start_t))}" ` +
        `data-end="${escapeHtml(String(iv.end_t))}" ` +
        `data-severity="${escapeHtml(String(iv.severity))}" ` +
        `x="${x.toFixed(1)}" y="0" width="${Math.max(w, 1).toFixed(1)}" height="${height}"/>`
      );
    })
    .join("");

  return (
    `<svg class="overlay" viewBox="0 0 ${width} ${height}" preserveAspectRatio="none">` +
    rects +
    line(a, "series-a") +
    line(b, "series-b") +
    `</svg>`
  );
}
