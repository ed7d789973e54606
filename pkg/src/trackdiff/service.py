"""JSON-over-HTTP query service for the operator console and scripts.

Endpoints (all JSON):

    GET  /api/tracks?spacecraft=&antenna=&comm_type=   track summaries
    GET  /api/tracks/{id}?grid_n=                      reconstructed channels
    GET  /api/tracks/{id}/raw                          raw sidecar (--keep-raw only)
    POST /api/compare   {a, b, items?, k?}             similarity breakdown
    POST /api/topk      {target, k?, items?}           ranked matches + DR refs
    POST /api/anomalies {target, reference, threshold_z?, min_run?, items?}
    POST /api/statdiff  {a, b, items?}                 Welch t-test per channel

Responses are deterministic for a fixed store snapshot; the store is reloaded
when another process has swapped in a new manifest.  Errors are structured
{"code", "message"} with a matching HTTP status.  The payload builders below
are shared with the CLI's --json mode, so both surfaces emit identical fields.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .analysis import detect_anomalies, stat_diff, topk_similar
from .compression import reconstruct_track
from .errors import (
    BindFailure,
    NotFound,
    StoreOpenFailure,
    TargetNotFound,
    TrackdiffError,
)
from .metrics import MetricConfig, compare_tracks
from .model import MonitorItemSet
from .store import TrackStore


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    store_path: str = "track_store"
    metric_cfg: MetricConfig = field(default_factory=MetricConfig)
    default_topk: int = 10


# ---------------------------------------------------------------------------
# payload builders (shared by HTTP handlers and the CLI --json mode)
# ---------------------------------------------------------------------------

def _items_from(param):
    if param is None:
        return MonitorItemSet()
    return MonitorItemSet(items=tuple(param))


def _cfg_with_k(cfg: MetricConfig, k):
    if k is None:
        return cfg
    return MetricConfig(
        k=float(k),
        grid_n=cfg.grid_n,
        dtw_band_frac=cfg.dtw_band_frac,
        channel_weights=cfg.channel_weights,
        allow_cross_type=cfg.allow_cross_type,
    )


def _load_track(store, track_id, grid_n):
    try:
        ct = store.read_compressed(track_id)
    except NotFound:
        raise TargetNotFound(f"track {track_id!r} not in store")
    return reconstruct_track(ct, grid_n)


def payload_tracks(store, spacecraft=None, antenna=None, comm_type=None):
    out = []
    for e in store.entries():
        if spacecraft and e.key.spacecraft != spacecraft:
            continue
        if antenna and e.key.antenna != antenna:
            continue
        if comm_type and e.key.comm_type != comm_type:
            continue
        out.append(e.as_dict())
    out.sort(key=lambda d: (-d["start_epoch"], d["track_id"]))
    return {"tracks": out}


def payload_track_detail(store, track_id, grid_n):
    try:
        ct = store.read_compressed(track_id)
    except NotFound:
        raise TargetNotFound(f"track {track_id!r} not in store")
    track = reconstruct_track(ct, grid_n)
    return {
        "track_id": ct.track_id,
        "spacecraft": ct.key.spacecraft,
        "antenna": ct.key.antenna,
        "comm_type": ct.key.comm_type,
        "start_epoch": ct.start_epoch,
        "dr_refs": list(ct.dr_refs),
        "grid_n": grid_n,
        "channels": {
            name: {"times": s.times.tolist(), "values": s.values.tolist()}
            for name, s in track.channels.items()
        },
    }


def payload_track_raw(store, track_id):
    """Raw sample sidecar for fidelity studies; present only with --keep-raw."""
    if track_id not in store:
        raise TargetNotFound(f"track {track_id!r} not in store")
    path = store.keep_raw_path(track_id)
    if not os.path.exists(path):
        raise TargetNotFound(f"track {track_id!r} has no raw sidecar (ingest with --keep-raw)")
    channels = {}
    import csv

    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            chan = channels.setdefault(row["channel"], {"times": [], "values": []})
            chan["times"].append(float(row["t"]))
            chan["values"].append(float(row["v"]))
    return {"track_id": track_id, "channels": channels}


def payload_compare(store, a, b, items=None, k=None, cfg=None):
    cfg = _cfg_with_k(cfg or MetricConfig(), k)
    ta = _load_track(store, a, cfg.grid_n)
    tb = _load_track(store, b, cfg.grid_n)
    bd = compare_tracks(ta, tb, _items_from(items), cfg)
    return {"a": a, "b": b, "k": cfg.k, "breakdown": bd.as_dict()}


def payload_topk(store, target, k=10, items=None, cfg=None):
    cfg = cfg or MetricConfig()
    matches = topk_similar(target, k, store, _items_from(items), cfg)
    return {"target": target, "k": int(k), "matches": [m.as_dict() for m in matches]}


def payload_anomalies(store, target, reference, threshold_z=3.0, min_run=5,
                      items=None, cfg=None):
    cfg = cfg or MetricConfig()
    tt = _load_track(store, target, cfg.grid_n)
    tr = _load_track(store, reference, cfg.grid_n)
    hits = detect_anomalies(tt, tr, threshold_z, min_run, _items_from(items), cfg)
    return {
        "target": target,
        "reference": reference,
        "threshold_z": threshold_z,
        "min_run": min_run,
        "intervals": [h.as_dict() for h in hits],
    }


def payload_statdiff(store, a, b, items=None, cfg=None):
    cfg = cfg or MetricConfig()
    ta = _load_track(store, a, cfg.grid_n)
    tb = _load_track(store, b, cfg.grid_n)
    rep = stat_diff(ta, tb, _items_from(items))
    return {"a": a, "b": b, "report": rep.as_dict()}


# ---------------------------------------------------------------------------
# HTTP server
# ---------------------------------------------------------------------------

class _StoreHolder:
    """Reloads the store when another process swapped in a new manifest."""

    def __init__(self, path):
        self.path = path
        self._lock = threading.Lock()
        self._mtime = None
        self._store = None
        self.get()

    def get(self) -> TrackStore:
        manifest = os.path.join(self.path, "manifest.json")
        mtime = os.path.getmtime(manifest) if os.path.exists(manifest) else -1.0
        with self._lock:
            if self._store is None or mtime != self._mtime:
                try:
                    self._store = TrackStore(self.path)
                except (OSError, TrackdiffError) as exc:
                    raise StoreOpenFailure(str(exc))
                self._mtime = mtime
            return self._store


def _error_body(code, message):
    return {"code": code, "message": message}


class _Handler(BaseHTTPRequestHandler):
    service: "TrackService" = None

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status, body):
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(data)

    def _dispatch(self, fn):
        try:
            status, body = fn()
        except TargetNotFound as exc:
            status, body = 404, _error_body("not_found", str(exc))
        except TrackdiffError as exc:
            status, body = 400, _error_body(type(exc).__name__, str(exc))
        except (KeyError, ValueError, TypeError) as exc:
            status, body = 400, _error_body("bad_request", str(exc))
        self._send(status, body)

    def do_GET(self):
        url = urlparse(self.path)
        q = {k: v[0] for k, v in parse_qs(url.query).items()}
        store = self.service.holder.get()

        def run():
            if url.path == "/api/tracks":
                return 200, payload_tracks(
                    store,
                    spacecraft=q.get("spacecraft"),
                    antenna=q.get("antenna"),
                    comm_type=q.get("comm_type"),
                )
            if url.path.startswith("/api/tracks/"):
                rest = url.path[len("/api/tracks/") :]
                if rest.endswith("/raw"):
                    return 200, payload_track_raw(store, rest[: -len("/raw")])
                grid_n = int(q.get("grid_n", self.service.cfg.metric_cfg.grid_n))
                return 200, payload_track_detail(store, rest, grid_n)
            return 404, _error_body("no_route", f"unknown path {url.path}")

        self._dispatch(run)

    def do_POST(self):
        url = urlparse(self.path)
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b"{}"
        store = self.service.holder.get()
        mcfg = self.service.cfg.metric_cfg

        def run():
            try:
                req = json.loads(raw.decode("utf-8")) if raw.strip() else {}
            except json.JSONDecodeError as exc:
                return 400, _error_body("bad_json", str(exc))
            if url.path == "/api/compare":
                return 200, payload_compare(
                    store, req["a"], req["b"], req.get("items"), req.get("k"), mcfg
                )
            if url.path == "/api/topk":
                return 200, payload_topk(
                    store,
                    req["target"],
                    req.get("k", self.service.cfg.default_topk),
                    req.get("items"),
                    mcfg,
                )
            if url.path == "/api/anomalies":
                return 200, payload_anomalies(
                    store,
                    req["target"],
                    req["reference"],
                    req.get("threshold_z", 3.0),
                    req.get("min_run", 5),
                    req.get("items"),
                    mcfg,
                )
            if url.path == "/api/statdiff":
                return 200, payload_statdiff(store, req["a"], req["b"], req.get("items"), mcfg)
            return 404, _error_body("no_route", f"unknown path {url.path}")

        self._dispatch(run)


class TrackService:
    """Owns the HTTP server; concurrent requests run on server threads."""

    def __init__(self, cfg: ServiceConfig):
        self.cfg = cfg
        self.holder = _StoreHolder(cfg.store_path)
        handler = type("BoundHandler", (_Handler,), {"service": self})
        try:
            self.httpd = ThreadingHTTPServer((cfg.host, cfg.port), handler)
        except OSError as exc:
            raise BindFailure(f"cannot bind {cfg.host}:{cfg.port}: {exc}")

    @property
    def address(self):
        return self.httpd.server_address[:2]

    def serve_forever(self):
        self.httpd.serve_forever()

    def shutdown(self):
        self.httpd.shutdown()
        self.httpd.server_close()


def serve(cfg: ServiceConfig):
    """Run the query service until interrupted."""
    svc = TrackService(cfg)
    host, port = svc.address
    print(f"trackdiff service on http://{host}:{port} (store: {cfg.store_path})")
    try:
        svc.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        svc.shutdown()
