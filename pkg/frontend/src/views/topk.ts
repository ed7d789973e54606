/** Ranked list of the most similar historical tracks.
 *
 * Rows appear in exactly the order the service returned them; clicking a row
 * navigates to the comparison view for (target, row).  Each row shows the
 * aggregate similarity score (clamped for display, raw in data-raw), a
 * sparkline preview when the track detail is available, and any attached
 * discrepancy report references.
 */

import { displaySs, escapeHtml } from "../format.js";
import type { TopkResponse, TrackDetail } from "../types.js";
import { sparklineSvg } from "./sparkline.js";

export function renderTopkPanel(
  topk: TopkResponse,
  details: Map<string, TrackDetail> = new Map(),
  previewChannel = "carrier_power",
): string {
  if (topk.matches.length === 0) {
    return (
      `<div class="empty-state" data-target="${escapeHtml(topk.target)}">` +
      `No same-type candidates for ${escapeHtml(topk.target)}.</div>`
    );
  }

  const rows = topk.matches
    .map((m, i) => {
      const d = displaySs(m.aggregate_ss);
      const series = details.get(m.track_id)?.channels[previewChannel];
      const preview = series ? sparklineSvg(series, "sparkline preview") : "";
      const refs = m.dr_refs.length
        ? m.dr_refs.map((r) => `<span class="dr-ref">${escapeHtml(r)}</span>`).join(" ")
        : `<span class="dr-none">-</span>`;
      return (
        `<tr class="topk-row" data-track-id="${escapeHtml(m.track_id)}" data-rank="${i + 1}">` +
        `<td class="rank">${i + 1}</td>` +
        `<td class="match-id">${escapeHtml(m.track_id)}</td>` +
        `<td class="ss${d.clamped ? " clamped" : ""}" data-raw="${escapeHtml(d.raw)}" ` +
        `title="raw ${escapeHtml(d.raw)}">${d.text}</td>` +
        `<td class="preview-cell">${preview}</td>` +
        `<td class="refs">${refs}</td>` +
        `</tr>`
      );
    })
    .join("");

  return (
    `<table class="topk-panel" data-target="${escapeHtml(topk.target)}">` +
    `<tr><th>#</th><th>track</th><th>ss</th><th>preview</th><th>DR refs</th></tr>` +
    rows +
    `</table>`
  );
}
