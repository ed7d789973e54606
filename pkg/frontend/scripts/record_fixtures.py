#!/usr/bin/env python3
"""Record API fixtures for the console's service-free test suite.

Builds a disposable store with deliberately shaped tracks, starts the real
query service, captures each endpoint's exact JSON response over HTTP, and
writes the bodies under fixtures/.  Regenerate after any service schema
change:

    python3 scripts/record_fixtures.py
"""

import json
import os
import tempfile
import threading
import urllib.error
import urllib.request

import numpy as np

from trackdiff.compression import compress_track
from trackdiff.model import DEFAULT_MONITOR_ITEMS, ChannelSeries, TrackKey, build_track
from trackdiff.service import ServiceConfig, TrackService
from trackdiff.store import TrackStore

OUT = os.path.join(os.path.dirname(__file__), "..", "fixtures")
GRID_N = 64


def build_store(root):
    store = TrackStore(root)
    key = TrackKey("VGR2", "DSS-55", "downlink")
    rng = np.random.default_rng(20250811)
    n = 1200
    t = np.arange(n, dtype=float)

    def channels(transform, seed_offset=0):
        out = []
        r = np.random.default_rng(99 + seed_offset)
        for i, name in enumerate(DEFAULT_MONITOR_ITEMS):
            base = (
                np.sin(2 * np.pi * t / (400 + 90 * i) + i)
                + 0.4 * np.sin(2 * np.pi * t / 150 + 2 * i)
            )
            out.append(ChannelSeries(name, t, transform(base) + 0.01 * r.normal(size=n)))
        return out

    alpha = build_track("alpha", key, 1000.0, channels(lambda b: b), dr_refs=())
    # beta: exact duplicate of alpha's signals (before noise), own noise seed
    beta = build_track("beta", key, 2000.0, channels(lambda b: b, seed_offset=1),
                       dr_refs=("DR-2041",))
    # gamma: anticorrelated and offset, so raw ss drops below -1
    gamma = build_track("gamma", key, 3000.0, channels(lambda b: -2.5 * b, seed_offset=2))
    for track in (alpha, beta, gamma):
        store.write_track(compress_track(track, 24))

    # spiky: alpha's shape with an injected square anomaly on carrier_power
    spiky_channels = channels(lambda b: b, seed_offset=3)
    cp = spiky_channels[0]
    v = cp.values.copy()
    v[500:520] += 15.0
    spiky_channels[0] = ChannelSeries(cp.channel_name, cp.times, v)
    store.write_track(compress_track(build_track("spiky", key, 4000.0, spiky_channels), 24))
    return store


def fetch(base, path, body=None):
    url = base + path
    if body is None:
        req = urllib.request.Request(url)
    else:
        req = urllib.request.Request(url, data=json.dumps(body).encode(), method="POST")
    try:
        with urllib.request.urlopen(req) as resp:
            return json.loads(resp.read())
    except urllib.error.HTTPError as e:
        return json.loads(e.read())


def main():
    os.makedirs(OUT, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        store = build_store(os.path.join(tmp, "store"))
        svc = TrackService(ServiceConfig(host="127.0.0.1", port=0, store_path=store.root))
        threading.Thread(target=svc.serve_forever, daemon=True).start()
        host, port = svc.address
        base = f"http://{host}:{port}"

        fixtures = {
            "tracks.json": fetch(base, "/api/tracks"),
            "tracks_empty.json": {"tracks": []},
            "compare_self.json": fetch(base, "/api/compare", {"a": "alpha", "b": "alpha"}),
            "compare_low.json": fetch(base, "/api/compare", {"a": "alpha", "b": "gamma"}),
            "statdiff.json": fetch(base, "/api/statdiff", {"a": "alpha", "b": "gamma"}),
            "topk.json": fetch(base, "/api/topk", {"target": "alpha", "k": 10}),
            "anomalies.json": fetch(
                base,
                "/api/anomalies",
                {"target": "spiky", "reference": "alpha", "threshold_z": 3.0, "min_run": 5},
            ),
            "error_not_found.json": fetch(base, "/api/topk", {"target": "ghost"}),
        }
        for tid in ("alpha", "beta", "gamma", "spiky"):
            fixtures[f"track_{tid}.json"] = fetch(base, f"/api/tracks/{tid}?grid_n={GRID_N}")
        svc.shutdown()

    for name, body in fixtures.items():
        with open(os.path.join(OUT, name), "w", encoding="utf-8") as f:
            json.dump(body, f, indent=1)
        print(f"wrote fixtures/{name}")

    low = fixtures["compare_low.json"]["breakdown"]
    print("low-correlation aggregate ss:", low["aggregate_ss"])
    assert low["aggregate_ss"] < -1.0, "clamping fixture must carry ss below -1"
    assert fixtures["topk.json"]["matches"], "topk fixture must have rows"
    assert fixtures["anomalies.json"]["intervals"], "anomaly fixture must have intervals"


if __name__ == "__main__":
    main()
