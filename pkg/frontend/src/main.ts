/** Browser bootstrap: wires the HTTP client, polling, and click navigation.
 *
 * Base URL comes from the `service` query parameter (default: same origin).
 * The track list refreshes on a poll interval (default 5 s, `?poll=` seconds)
 * rather than streaming; responses apply only if no newer request has landed.
 */

import { HttpApiClient, ServiceError, type ApiClient } from "./api.js";
import {
  applyResponse,
  clickTopkRow,
  initialState,
  nextRequest,
  selectTrack,
  showTopk,
  type ViewState,
} from "./state.js";
import type { TrackDetail, TracksResponse } from "./types.js";
import { renderTrackBrowser } from "./views/browser.js";
import { renderComparison } from "./views/comparison.js";
import { renderTopkPanel } from "./views/topk.js";

const GRID_N = 128;

class Console {
  state: ViewState = initialState();
  tracks: TracksResponse = { tracks: [] };
  details = new Map<string, TrackDetail>();

  constructor(
    private api: ApiClient,
    private root: HTMLElement,
    private status: HTMLElement,
  ) {}

  async refreshTracks() {
    const { state, seq } = nextRequest(this.state);
    this.state = state;
    try {
      const tracks = await this.api.getTracks();
      for (const t of tracks.tracks) {
        if (!this.details.has(t.track_id)) {
          this.details.set(t.track_id, await this.api.getTrack(t.track_id, GRID_N));
        }
      }
      this.state = applyResponse(this.state, seq, (s) => s);
      this.tracks = tracks;
      this.status.textContent = `${tracks.tracks.length} track(s)`;
    } catch (err) {
      this.status.textContent = `service unreachable: ${String(err)}`;
    }
    this.render();
  }

  async openTopk(target: string) {
    this.state = selectTrack(this.state, target);
    try {
      const topk = await this.api.topk(target);
      this.state = showTopk(this.state, topk);
    } catch (err) {
      this.status.textContent = err instanceof ServiceError ? err.message : String(err);
    }
    this.render();
  }

  async openComparison(rowTrackId: string) {
    this.state = clickTopkRow(this.state, rowTrackId);
    this.render();
  }

  async render() {
    const s = this.state;
    if (s.view === "browser") {
      this.root.innerHTML = renderTrackBrowser(this.tracks.tracks, this.details);
    } else if (s.view === "topk" && s.topk) {
      this.root.innerHTML = renderTopkPanel(s.topk, this.details);
    } else if (s.view === "comparison" && s.selectedTrackId && s.comparisonTargetId) {
      const a = s.selectedTrackId;
      const b = s.comparisonTargetId;
      try {
        const [compare, statdiff, anomalies] = await Promise.all([
          this.api.compare(a, b),
          this.api.statdiff(a, b),
          this.api.anomalies(a, b).catch(() => null),
        ]);
        this.root.innerHTML = renderComparison(
          a,
          b,
          compare,
          statdiff,
          anomalies,
          this.details.get(a) ?? null,
          this.details.get(b) ?? null,
        );
      } catch (err) {
        this.root.innerHTML = `<div class="error-state">${String(err)}</div>`;
      }
    }
  }
}

function boot() {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("service") ?? "";
  const pollSeconds = Number(params.get("poll") ?? "5");
  const root = document.getElementById("console-root")!;
  const status = document.getElementById("status")!;
  const app = new Console(new HttpApiClient(base), root, status);

  root.addEventListener("click", (ev) => {
    const el = ev.target as HTMLElement;
    const selectBtn = el.closest<HTMLElement>(".select-track");
    if (selectBtn?.dataset.trackId) {
      void app.openTopk(selectBtn.dataset.trackId);
      return;
    }
    const row = el.closest<HTMLElement>(".topk-row");
    if (row?.dataset.trackId) {
      void app.openComparison(row.dataset.trackId);
    }
  });

  void app.refreshTracks();
  window.setInterval(() => {
    if (app.state.view === "browser") void app.refreshTracks();
  }, pollSeconds * 1000);
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  boot();
}
