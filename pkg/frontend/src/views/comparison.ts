/** Pairwise comparison view: channel overlays, the similarity breakdown
 * table, the statistical difference table, and anomaly shading when a
 * reference has been designated.
 *
 * Numeric cells carry the raw service field in data-raw; similarity scores
 * are clamped to [-1, 1] for display with the raw value footnoted.
 */

import { displaySs, escapeHtml, fmt } from "../format.js";
import type {
  AnomaliesResponse,
  CompareResponse,
  StatDiffResponse,
  TrackDetail,
} from "../types.js";
import { overlaySvg } from "./sparkline.js";

function metricCell(value: number, cls: string, digits = 4): string {
  return `<td class="${cls}" data-raw="${escapeHtml(String(value))}">${fmt(value, digits)}</td>`;
}

function ssCell(value: number, cls = "ss"): string {
  const d = displaySs(value);
  const flag = d.clamped ? ` clamped` : "";
  return (
    `<td class="${cls}${flag}" data-raw="${escapeHtml(d.raw)}" ` +
    `title="raw ${escapeHtml(d.raw)}">${d.text}</td>`
  );
}

function breakdownTable(compare: CompareResponse): string {
  const bd = compare.breakdown;
  const channels = Object.keys(bd.per_channel);
  const rows = channels
    .map((name) => {
      const m = bd.per_channel[name]!;
      return (
        `<tr data-channel="${escapeHtml(name)}">` +
        `<th>${escapeHtml(name)}</th>` +
        metricCell(m.ed, "ed") +
        metricCell(m.dtw, "dtw") +
        metricCell(m.pc, "pc") +
        ssCell(m.ss) +
        `</tr>`
      );
    })
    .join("");
  const aggregate =
    `<tr class="aggregate-row">` +
    `<th>aggregate</th>` +
    metricCell(bd.aggregate_ed, "ed") +
    metricCell(bd.aggregate_dtw, "dtw") +
    metricCell(bd.aggregate_pc, "pc") +
    ssCell(bd.aggregate_ss, "ss aggregate-ss") +
    `</tr>`;
  const anyClamped =
    channels.some((c) => displaySs(bd.per_channel[c]!.ss).clamped) ||
    displaySs(bd.aggregate_ss).clamped;
  const footnote = anyClamped
    ? `<p class="clamp-footnote" data-raw-aggregate-ss="${escapeHtml(String(bd.aggregate_ss))}">` +
      `* similarity scores clamped to [-1, 1] for display; raw aggregate ss = ${escapeHtml(String(bd.aggregate_ss))}</p>`
    : "";
  const missing = bd.missing.length
    ? `<p class="missing-note">missing channels: ${bd.missing.map(escapeHtml).join(", ")}</p>`
    : "";
  return (
    `<table class="breakdown">` +
    `<tr><th>channel</th><th>ed</th><th>dtw</th><th>pc</th><th>ss</th></tr>` +
    rows +
    aggregate +
    `</table>` +
    footnote +
    missing
  );
}

function statDiffTable(statdiff: StatDiffResponse): string {
  const rows = Object.entries(statdiff.report.per_channel)
    .map(
      ([name, s]) =>
        `<tr data-channel="${escapeHtml(name)}">` +
        `<th>${escapeHtml(name)}</th>` +
        metricCell(s.t_stat, "t-stat", 3) +
        metricCell(s.dof, "dof", 1) +
        `<td class="p-value" data-raw="${escapeHtml(String(s.p_value))}">${s.p_value.toExponential(2)}</td>` +
        metricCell(s.mean_delta, "mean-delta") +
        `</tr>`,
    )
    .join("");
  return (
    `<table class="statdiff">` +
    `<tr><th>channel</th><th>t</th><th>dof</th><th>p</th><th>mean delta</th></tr>` +
    rows +
    `</table>`
  );
}

export function renderComparison(
  a: string,
  b: string,
  compare: CompareResponse,
  statdiff: StatDiffResponse,
  anomalies: AnomaliesResponse | null,
  detailA: TrackDetail | null,
  detailB: TrackDetail | null,
): string {
  const overlays =
    detailA && detailB
      ? Object.keys(compare.breakdown.per_channel)
          .map((name) => {
            const sa = detailA.channels[name];
            const sb = detailB.channels[name];
            if (!sa || !sb) return "";
            const shading = (anomalies?.intervals ?? []).filter(
              (iv) => iv.channel_name === name,
            );
            return (
              `<figure class="channel-overlay" data-channel="${escapeHtml(name)}">` +
              `<figcaption>${escapeHtml(name)}</figcaption>` +
              overlaySvg(sa, sb, shading) +
              `</figure>`
            );
          })
          .join("")
      : `<p class="overlay-unavailable">channel reconstructions unavailable</p>`;

  const anomalyNote = anomalies
    ? `<p class="anomaly-note">${anomalies.intervals.length} anomalous interval(s) vs reference ` +
      `${escapeHtml(anomalies.reference)} (threshold_z=${anomalies.threshold_z}, min_run=${anomalies.min_run})</p>`
    : "";

  return (
    `<section class="comparison" data-a="${escapeHtml(a)}" data-b="${escapeHtml(b)}">` +
    `<h2>${escapeHtml(a)} vs ${escapeHtml(b)}</h2>` +
    `<div class="overlays">${overlays}</div>` +
    anomalyNote +
    `<h3>similarity breakdown</h3>` +
    breakdownTable(compare) +
    `<h3>statistical difference</h3>` +
    statDiffTable(statdiff) +
    `</section>`
  );
}
