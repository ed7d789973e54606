/** Typed client for the trackdiff query service.
 *
 * HttpApiClient talks to a live service; FixtureApiClient serves recorded
 * responses so every view renders and tests run with no service present.
 */

import type {
  AnomaliesResponse,
  CompareResponse,
  StatDiffResponse,
  TopkResponse,
  TrackDetail,
  TracksResponse,
} from "./types.js";

export interface TrackFilter {
  spacecraft?: string;
  antenna?: string;
  comm_type?: string;
}

export interface ApiClient {
  getTracks(filter?: TrackFilter): Promise<TracksResponse>;
  getTrack(id: string, gridN?: number): Promise<TrackDetail>;
  compare(a: string, b: string, items?: string[], k?: number): Promise<CompareResponse>;
  topk(target: string, k?: number, items?: string[]): Promise<TopkResponse>;
  anomalies(
    target: string,
    reference: string,
    thresholdZ?: number,
    minRun?: number,
  ): Promise<AnomaliesResponse>;
  statdiff(a: string, b: string, items?: string[]): Promise<StatDiffResponse>;
}

export function buildTracksUrl(base: string, filter?: TrackFilter): string {
  const params = new URLSearchParams();
  if (filter?.spacecraft) params.set("spacecraft", filter.spacecraft);
  if (filter?.antenna) params.set("antenna", filter.antenna);
  if (filter?.comm_type) params.set("comm_type", filter.comm_type);
  const qs = params.toString();
  return `${base}/api/tracks${qs ? `?${qs}` : ""}`;
}

export function buildTrackUrl(base: string, id: string, gridN?: number): string {
  const suffix = gridN === undefined ? "" : `?grid_n=${gridN}`;
  return `${base}/api/tracks/${encodeURIComponent(id)}${suffix}`;
}

async function postJson<T>(url: string, body: unknown): Promise<T> {
  const resp = await fetch(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  const payload = await resp.json();
  if (!resp.ok) {
    throw new ServiceError(payload.code ?? "error", payload.message ?? resp.statusText);
  }
  return payload as T;
}

async function getJson<T>(url: string): Promise<T> {
  const resp = await fetch(url);
  const payload = await resp.json();
  if (!resp.ok) {
    throw new ServiceError(payload.code ?? "error", payload.message ?? resp.statusText);
  }
  return payload as T;
}

export class ServiceError extends Error {
  constructor(
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export class HttpApiClient implements ApiClient {
  constructor(private base: string) {}

  getTracks(filter?: TrackFilter) {
    return getJson<TracksResponse>(buildTracksUrl(this.base, filter));
  }

  getTrack(id: string, gridN?: number) {
    return getJson<TrackDetail>(buildTrackUrl(this.base, id, gridN));
  }

  compare(a: string, b: string, items?: string[], k?: number) {
    return postJson<CompareResponse>(`${this.base}/api/compare`, { a, b, items, k });
  }

  topk(target: string, k = 10, items?: string[]) {
    return postJson<TopkResponse>(`${this.base}/api/topk`, { target, k, items });
  }

  anomalies(target: string, reference: string, thresholdZ = 3.0, minRun = 5) {
    return postJson<AnomaliesResponse>(`${this.base}/api/anomalies`, {
      target,
      reference,
      threshold_z: thresholdZ,
      min_run: minRun,
    });
  }

  statdiff(a: string, b: string, items?: string[]) {
    return postJson<StatDiffResponse>(`${this.base}/api/statdiff`, { a, b, items });
  }
}

export interface FixtureSet {
  tracks: TracksResponse;
  details: Record<string, TrackDetail>;
  compare: Record<string, CompareResponse>; // keyed "a|b"
  topk: Record<string, TopkResponse>; // keyed by target
  anomalies: Record<string, AnomaliesResponse>; // keyed "target|reference"
  statdiff: Record<string, StatDiffResponse>; // keyed "a|b"
}

/** Replays recorded responses; throws the service's 404 shape for misses. */
export class FixtureApiClient implements ApiClient {
  constructor(private fixtures: FixtureSet) {}

  private pick<T>(table: Record<string, T>, key: string, what: string): Promise<T> {
    const hit = table[key];
    if (hit === undefined) {
      return Promise.reject(new ServiceError("not_found", `${what} ${key} not recorded`));
    }
    return Promise.resolve(hit);
  }

  getTracks() {
    return Promise.resolve(this.fixtures.tracks);
  }

  getTrack(id: string) {
    return this.pick(this.fixtures.details, id, "track");
  }

  compare(a: string, b: string) {
    return this.pick(this.fixtures.compare, `${a}|${b}`, "compare");
  }

  topk(target: string) {
    return this.pick(this.fixtures.topk, target, "topk");
  }

  anomalies(target: string, reference: string) {
    return this.pick(this.fixtures.anomalies, `${target}|${reference}`, "anomalies");
  }

  statdiff(a: string, b: string) {
    return this.pick(this.fixtures.statdiff, `${a}|${b}`, "statdiff");
  }
}
