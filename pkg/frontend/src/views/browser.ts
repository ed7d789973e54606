/** Track browser: grid of tracks (rows) by monitor items (columns).
 *
 * Every panel is drawn from a GET /api/tracks/{id} payload; the first/last
 * sample values ride along verbatim in data attributes so fidelity to the
 * service response is checkable.
 */

import { escapeHtml, fmt } from "../format.js";
import type { TrackDetail, TrackSummary } from "../types.js";
import { MONITOR_ITEMS } from "../types.js";
import { sparklineSvg } from "./sparkline.js";

export function renderTrackBrowser(
  tracks: TrackSummary[],
  details: Map<string, TrackDetail>,
  items: readonly string[] = MONITOR_ITEMS,
): string {
  if (tracks.length === 0) {
    return `<div class="empty-state">No tracks in the store yet. Ingest a batch directory or connect a stream to get started.</div>`;
  }

  const header =
    `<tr><th>track</th>` +
    items.map((c) => `<th class="item-head">${escapeHtml(c)}</th>`).join("") +
    `</tr>`;

  const rows = tracks
    .map((track) => {
      const detail = details.get(track.track_id);
      const cells = items
        .map((item) => {
          const series = detail?.channels[item];
          if (!series || series.values.length === 0) {
            return `<td class="panel panel-missing" data-track="${escapeHtml(track.track_id)}" data-channel="${escapeHtml(item)}">n/a</td>`;
          }
          const first = series.values[0]!;
          const last = series.values[series.values.length - 1]!;
          return (
            `<td class="panel" data-track="${escapeHtml(track.track_id)}" ` +
            `data-channel="${escapeHtml(item)}" ` +
            `data-first="${escapeHtml(String(first))}" ` +
            `data-last="${escapeHtml(String(last))}" ` +
            `data-points="${series.values.length}">` +
            sparklineSvg(series) +
            `<span class="panel-last" title="${escapeHtml(String(last))}">${fmt(last, 2)}</span>` +
            `</td>`
          );
        })
        .join("");
      const refs = track.dr_refs.length
        ? `<span class="dr-refs">${track.dr_refs.map(escapeHtml).join(", ")}</span>`
        : "";
      return (
        `<tr class="track-row" data-track-id="${escapeHtml(track.track_id)}">` +
        `<th class="track-head"><button class="select-track" data-track-id="${escapeHtml(track.track_id)}">${escapeHtml(track.track_id)}</button>` +
        `<small>${escapeHtml(track.spacecraft)} / ${escapeHtml(track.antenna)} / ${escapeHtml(track.comm_type)}</small>${refs}</th>` +
        cells +
        `</tr>`
      );
    })
    .join("");

  return `<table class="browser-grid">${header}${rows}</table>`;
}
