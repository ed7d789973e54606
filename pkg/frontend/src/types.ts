/** Response shapes of the trackdiff query service, mirrored field-for-field. */

export interface TrackSummary {
  track_id: string;
  spacecraft: string;
  antenna: string;
  comm_type: string;
  start_epoch: number;
  channel_names: string[];
  hinge_counts: number[];
  dr_refs: string[];
  offset: number;
  length: number;
}

export interface TracksResponse {
  tracks: TrackSummary[];
}

export interface SeriesData {
  times: number[];
  values: number[];
}

export interface TrackDetail {
  track_id: string;
  spacecraft: string;
  antenna: string;
  comm_type: string;
  start_epoch: number;
  dr_refs: string[];
  grid_n: number;
  channels: Record<string, SeriesData>;
}

export interface ChannelMetrics {
  ed: number;
  dtw: number;
  pc: number;
  ss: number;
}

export interface Breakdown {
  per_channel: Record<string, ChannelMetrics>;
  aggregate_ed: number;
  aggregate_dtw: number;
  aggregate_pc: number;
  aggregate_ss: number;
  missing: string[];
}

export interface CompareResponse {
  a: string;
  b: string;
  k: number;
  breakdown: Breakdown;
}

export interface RankedMatch {
  track_id: string;
  aggregate_ss: number;
  breakdown: Breakdown;
  dr_refs: string[];
}

export interface TopkResponse {
  target: string;
  k: number;
  matches: RankedMatch[];
}

export interface AnomalyInterval {
  channel_name: string;
  start_t: number;
  end_t: number;
  severity: number;
  mean_residual: number;
}

export interface AnomaliesResponse {
  target: string;
  reference: string;
  threshold_z: number;
  min_run: number;
  intervals: AnomalyInterval[];
}

export interface ChannelStats {
  t_stat: number;
  dof: number;
  p_value: number;
  mean_a: number;
  mean_b: number;
  std_a: number;
  std_b: number;
  mean_delta: number;
  min_delta: number;
  max_delta: number;
}

export interface StatDiffResponse {
  a: string;
  b: string;
  report: { per_channel: Record<string, ChannelStats> };
}

export interface ApiError {
  code: string;
  message: string;
}

/** The seven default monitor items, in canonical display order. */
export const MONITOR_ITEMS = [
  "carrier_power",
  "carrier_system_noise_temp",
  "carrier_track_loop_lock",
  "subcarrier_track_loop_lock",
  "symbol_rate",
  "symbol_track_loop_state",
  "telemetry_frame_sync_lock",
] as const;
