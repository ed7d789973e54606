/** View state and its pure transitions.
 *
 * Navigation is data: clicking a top-K row produces a comparison state for
 * that pair.  In-flight requests carry sequence numbers; a response only
 * applies if nothing newer has landed, so stale answers from slow requests
 * are discarded.
 */

import type { AnomaliesResponse, TopkResponse } from "./types.js";

export type ViewName = "browser" | "topk" | "comparison";

export interface ViewState {
  view: ViewName;
  selectedTrackId: string | null;
  comparisonTargetId: string | null;
  overlayChannels: string[];
  topk: TopkResponse | null;
  anomalies: AnomaliesResponse | null;
  requestSeq: number;
  appliedSeq: number;
}

export function initialState(): ViewState {
  return {
    view: "browser",
    selectedTrackId: null,
    comparisonTargetId: null,
    overlayChannels: [],
    topk: null,
    anomalies: null,
    requestSeq: 0,
    appliedSeq: 0,
  };
}

export function selectTrack(state: ViewState, trackId: string): ViewState {
  return { ...state, selectedTrackId: trackId, view: "browser" };
}

export function showTopk(state: ViewState, topk: TopkResponse): ViewState {
  return { ...state, view: "topk", selectedTrackId: topk.target, topk };
}

/** Row click in the top-K panel navigates to the comparison of that pair. */
export function clickTopkRow(state: ViewState, rowTrackId: string): ViewState {
  return { ...state, view: "comparison", comparisonTargetId: rowTrackId };
}

export function setOverlayChannels(state: ViewState, channels: string[]): ViewState {
  return { ...state, overlayChannels: [...channels] };
}

export function setAnomalies(state: ViewState, anomalies: AnomaliesResponse | null): ViewState {
  return { ...state, anomalies };
}

/** Allocate a sequence number for a request about to be issued. */
export function nextRequest(state: ViewState): { state: ViewState; seq: number } {
  const seq = state.requestSeq + 1;
  return { state: { ...state, requestSeq: seq }, seq };
}

/**
 * Apply a response transition only if it is newer than the last applied one;
 * otherwise the state is returned unchanged (stale response discarded).
 */
export function applyResponse(
  state: ViewState,
  seq: number,
  transition: (s: ViewState) => ViewState,
): ViewState {
  if (seq <= state.appliedSeq) {
    return state;
  }
  return { ...transition(state), appliedSeq: seq };
}
