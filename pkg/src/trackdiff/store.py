"""Persistent compressed track archive and its ingestion paths.

Layout on disk (one directory per store):

    archive.bin    append-only data file: magic "TRKC", u16 version, then one
                   block per track: u32 payload length, payload, u32 CRC32 of
                   the payload.  Payload encoding is little-endian: strings as
                   u16 length + UTF-8, f64 for numerics, u32 lengths for hinge
                   arrays.
    manifest.json  index of every stored track (id, key, start epoch, channel
                   names, hinge counts, DR references, block offset/length).
                   Rewritten to a temp file and atomically swapped on every
                   mutation, so a crash mid-write leaves the previous manifest
                   consistent and the archive merely carries orphan bytes.
    raw/           optional sidecar CSVs of raw samples (--keep-raw only).

Two ingestion paths feed the archive: batch directories of CSV sample files
(offline history) and a newline-delimited JSON record stream (live tracks).
Raw samples are not retained after compression unless keep_raw is set.
"""

from __future__ import annotations

import csv
import json
import os
import socket
import struct
import threading
import zlib
from dataclasses import dataclass, field

import numpy as np

from .compression import CompressedChannel, CompressedTrack, compress_track
from .errors import (
    CorruptArchive,
    DuplicateTrackId,
    ManifestMissing,
    NotFound,
    TrackdiffError,
)
from .model import ChannelSeries, Track, TrackKey, build_track, validate_track

MAGIC = b"TRKC"
VERSION = 1


def _pack_str(s):
    b = s.encode("utf-8")
    return struct.pack("<H", len(b)) + b


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise CorruptArchive("payload truncated")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u16(self):
        return struct.unpack("<H", self.take(2))[0]

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def f64(self):
        return struct.unpack("<d", self.take(8))[0]

    def string(self):
        return self.take(self.u16()).decode("utf-8")

    def f64_array(self, n):
        return np.frombuffer(self.take(8 * n), dtype="<f8").copy()


def _encode_track(ct: CompressedTrack) -> bytes:
    out = [
        _pack_str(ct.track_id),
        _pack_str(ct.key.spacecraft),
        _pack_str(ct.key.antenna),
        _pack_str(ct.key.comm_type),
        struct.pack("<d", ct.start_epoch),
        struct.pack("<H", len(ct.dr_refs)),
    ]
    out.extend(_pack_str(r) for r in ct.dr_refs)
    out.append(struct.pack("<H", len(ct.channels)))
    for name in sorted(ct.channels):
        cc = ct.channels[name]
        out.append(_pack_str(name))
        out.append(struct.pack("<I", cc.hinge_count))
        out.append(np.asarray(cc.hinge_times, dtype="<f8").tobytes())
        out.append(np.asarray(cc.hinge_values, dtype="<f8").tobytes())
        out.append(struct.pack("<d", cc.fit_rms))
    return b"".join(out)


def _decode_track(payload: bytes) -> CompressedTrack:
    r = _Reader(payload)
    track_id = r.string()
    key = TrackKey(r.string(), r.string(), r.string())
    start_epoch = r.f64()
    dr_refs = tuple(r.string() for _ in range(r.u16()))
    channels = {}
    for _ in range(r.u16()):
        name = r.string()
        n = r.u32()
        times = r.f64_array(n)
        values = r.f64_array(n)
        fit_rms = r.f64()
        channels[name] = CompressedChannel(
            channel_name=name, hinge_times=times, hinge_values=values, fit_rms=fit_rms
        )
    if r.pos != len(payload):
        raise CorruptArchive("trailing bytes in track payload")
    return CompressedTrack(
        track_id=track_id,
        key=key,
        start_epoch=start_epoch,
        channels=channels,
        reports={},
        dr_refs=dr_refs,
    )


@dataclass
class ManifestEntry:
    track_id: str
    key: TrackKey
    start_epoch: float
    channel_names: list[str]
    hinge_counts: list[int]
    dr_refs: list[str]
    offset: int
    length: int

    def as_dict(self):
        d = self.key.as_dict()
        d.update(
            track_id=self.track_id,
            start_epoch=self.start_epoch,
            channel_names=self.channel_names,
            hinge_counts=self.hinge_counts,
            dr_refs=self.dr_refs,
            offset=self.offset,
            length=self.length,
        )
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            track_id=d["track_id"],
            key=TrackKey(d["spacecraft"], d["antenna"], d["comm_type"]),
            start_epoch=float(d["start_epoch"]),
            channel_names=list(d["channel_names"]),
            hinge_counts=list(d["hinge_counts"]),
            dr_refs=list(d["dr_refs"]),
            offset=int(d["offset"]),
            length=int(d["length"]),
        )


class TrackStore:
    """Archive directory handle.  Many readers, one writer at a time."""

    def __init__(self, root):
        self.root = os.fspath(root)
        self.archive_path = os.path.join(self.root, "archive.bin")
        self.manifest_path = os.path.join(self.root, "manifest.json")
        self._lock = threading.Lock()
        self._read_fh = None
        os.makedirs(self.root, exist_ok=True)
        if not os.path.exists(self.archive_path):
            with open(self.archive_path, "wb") as f:
                f.write(MAGIC + struct.pack("<H", VERSION))
        else:
            with open(self.archive_path, "rb") as f:
                head = f.read(6)
            if head[:4] != MAGIC:
                raise CorruptArchive(f"{self.archive_path}: bad magic")
            if struct.unpack("<H", head[4:6])[0] != VERSION:
                raise CorruptArchive(f"{self.archive_path}: unsupported version")
        self._entries: dict[str, ManifestEntry] = {}
        if os.path.exists(self.manifest_path):
            with open(self.manifest_path, "r", encoding="utf-8") as f:
                doc = json.load(f)
            for d in doc.get("tracks", []):
                e = ManifestEntry.from_dict(d)
                self._entries[e.track_id] = e

    # -- manifest --

    def _flush_manifest(self):
        doc = {
            "version": VERSION,
            "tracks": [e.as_dict() for e in self._entries.values()],
        }
        tmp = self.manifest_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(doc, f)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, self.manifest_path)

    def __len__(self):
        return len(self._entries)

    def __contains__(self, track_id):
        return track_id in self._entries

    def track_ids(self):
        return list(self._entries)

    def entry(self, track_id) -> ManifestEntry:
        if track_id not in self._entries:
            raise NotFound(f"track {track_id!r} not in store")
        return self._entries[track_id]

    def entries(self):
        return list(self._entries.values())

    # -- write / read --

    def write_track(self, ct: CompressedTrack):
        if ct.track_id in self._entries:
            raise DuplicateTrackId(f"track {ct.track_id!r} already stored")
        payload = _encode_track(ct)
        block = (
            struct.pack("<I", len(payload))
            + payload
            + struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)
        )
        with self._lock:
            with open(self.archive_path, "ab") as f:
                offset = f.tell()
                f.write(block)
                f.flush()
                os.fsync(f.fileno())
            self._entries[ct.track_id] = ManifestEntry(
                track_id=ct.track_id,
                key=ct.key,
                start_epoch=ct.start_epoch,
                channel_names=sorted(ct.channels),
                hinge_counts=[ct.channels[c].hinge_count for c in sorted(ct.channels)],
                dr_refs=list(ct.dr_refs),
                offset=offset,
                length=len(block),
            )
            self._flush_manifest()
        return self

    def write_compressed(self, track_id, key, channels, start_epoch=0.0, dr_refs=()):
        """Store already-compressed channels under a new track id."""
        ct = CompressedTrack(
            track_id=track_id,
            key=key,
            start_epoch=float(start_epoch),
            channels=dict(channels),
            reports={},
            dr_refs=tuple(dr_refs),
        )
        return self.write_track(ct)

    def _read_block(self, offset, length):
        # persistent read handle; top-K scans read hundreds of blocks
        with self._lock:
            if self._read_fh is None:
                self._read_fh = open(self.archive_path, "rb")
            self._read_fh.seek(offset)
            return self._read_fh.read(length)

    def read_compressed(self, track_id) -> CompressedTrack:
        e = self.entry(track_id)
        block = self._read_block(e.offset, e.length)
        if len(block) != e.length:
            raise CorruptArchive(f"track {track_id!r}: short read")
        (plen,) = struct.unpack("<I", block[:4])
        if plen + 8 != e.length:
            raise CorruptArchive(f"track {track_id!r}: length mismatch")
        payload = block[4 : 4 + plen]
        (crc,) = struct.unpack("<I", block[4 + plen :])
        if zlib.crc32(payload) & 0xFFFFFFFF != crc:
            raise CorruptArchive(f"track {track_id!r}: checksum mismatch")
        return _decode_track(payload)

    def query_same_type(self, key: TrackKey):
        """All stored ids with this exact key, newest start epoch first."""
        hits = [e for e in self._entries.values() if e.key == key]
        hits.sort(key=lambda e: (-e.start_epoch, e.track_id))
        return [e.track_id for e in hits]

    # -- raw sidecars --

    def keep_raw_path(self, track_id):
        return os.path.join(self.root, "raw", f"{track_id}.csv")

    def write_raw_sidecar(self, track: Track):
        path = self.keep_raw_path(track.track_id)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["track_id", "channel", "t", "v"])
            for name, s in track.channels.items():
                for t, v in zip(s.times, s.values):
                    w.writerow(
                        [track.track_id, name, repr(float(t) + track.start_epoch), repr(float(v))]
                    )


# ---------------------------------------------------------------------------
# batch ingestion (offline history stand-in)
# ---------------------------------------------------------------------------

@dataclass
class IngestReport:
    ingested: list[str] = field(default_factory=list)
    errors: list[tuple[str, str]] = field(default_factory=list)

    @property
    def count(self):
        return len(self.ingested)


def _track_from_rows(meta, rows) -> Track:
    """rows: iterable of (channel, t_epoch, value) for one track."""
    start_epoch = float(meta["start_epoch"])
    per_channel: dict[str, list[tuple[float, float]]] = {}
    for channel, t, v in rows:
        per_channel.setdefault(channel, []).append((float(t) - start_epoch, float(v)))
    series = [
        ChannelSeries(
            channel_name=name,
            times=np.array([p[0] for p in pts]),
            values=np.array([p[1] for p in pts]),
        )
        for name, pts in per_channel.items()
    ]
    return build_track(
        meta["track_id"],
        TrackKey(meta["spacecraft"], meta["antenna"], meta["comm_type"]),
        start_epoch,
        series,
        dr_refs=tuple(meta.get("dr_refs", [])),
    )


def ingest_batch(path, store: TrackStore, budget: int, keep_raw=False) -> IngestReport:
    """Ingest a directory of per-track CSV files described by manifest.json.

    The manifest is a JSON list of track metadata objects; each track's
    samples live in `<track_id>.csv` with header track_id,channel,t,v and t
    in absolute epoch seconds.  Malformed tracks are reported and skipped.
    """
    manifest_path = os.path.join(os.fspath(path), "manifest.json")
    if not os.path.exists(manifest_path):
        raise ManifestMissing(f"no manifest.json under {path}")
    with open(manifest_path, "r", encoding="utf-8") as f:
        metas = json.load(f)

    report = IngestReport()
    for meta in metas:
        track_id = meta.get("track_id", "<missing id>")
        try:
            csv_path = os.path.join(os.fspath(path), f"{track_id}.csv")
            if not os.path.exists(csv_path):
                raise TrackdiffError(f"sample file {track_id}.csv missing")
            rows = []
            with open(csv_path, newline="", encoding="utf-8") as f:
                for row in csv.DictReader(f):
                    if row["track_id"] != track_id:
                        raise TrackdiffError(
                            f"row track_id {row['track_id']!r} does not match file"
                        )
                    rows.append((row["channel"], row["t"], row["v"]))
            track = validate_track(_track_from_rows(meta, rows))
            store.write_track(compress_track(track, budget))
            if keep_raw:
                store.write_raw_sidecar(track)
            report.ingested.append(track_id)
        except (TrackdiffError, KeyError, ValueError) as exc:
            report.errors.append((track_id, f"{type(exc).__name__}: {exc}"))
    return report


# ---------------------------------------------------------------------------
# streaming ingestion (live track stand-in)
# ---------------------------------------------------------------------------

@dataclass
class StreamStats:
    stored: list[str] = field(default_factory=list)
    orphan_samples: int = 0
    unterminated: list[str] = field(default_factory=list)
    errors: list[tuple[str, str]] = field(default_factory=list)


class StreamIngestor:
    """Consumes newline-delimited JSON stream records into a store.

    Protocol: a `{"event": "track_start", ...}` line opens a track, sample
    lines `{"track_id", "channel", "t", "v"}` append to it (O(1) buffering,
    no per-sample I/O), and `{"event": "track_end", ...}` validates,
    compresses, and durably writes it.  Samples outside a start/end window
    are counted as orphans and dropped.  Tracks still open at close() are
    flushed with a warning entry in the stats.
    """

    def __init__(self, store: TrackStore, budget: int, keep_raw=False):
        self.store = store
        self.budget = budget
        self.keep_raw = keep_raw
        self.stats = StreamStats()
        self._open: dict[str, dict] = {}

    def handle_line(self, line):
        line = line.strip()
        if not line:
            return
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            self.stats.errors.append(("<parse>", str(exc)))
            return
        self.handle_record(rec)

    def handle_record(self, rec: dict):
        event = rec.get("event")
        if event == "track_start":
            self._start(rec)
        elif event == "track_end":
            self._end(rec)
        elif event is None:
            self._sample(rec)
        else:
            self.stats.errors.append((rec.get("track_id", "?"), f"unknown event {event!r}"))

    def _start(self, rec):
        tid = rec["track_id"]
        if tid in self._open:
            self.stats.errors.append((tid, "duplicate track_start"))
            return
        self._open[tid] = {
            "meta": {
                "track_id": tid,
                "spacecraft": rec["spacecraft"],
                "antenna": rec["antenna"],
                "comm_type": rec["comm_type"],
                "start_epoch": rec.get("start_epoch"),
                "dr_refs": rec.get("dr_refs", []),
            },
            "rows": [],
        }

    def _sample(self, rec):
        tid = rec.get("track_id")
        buf = self._open.get(tid)
        if buf is None:
            self.stats.orphan_samples += 1
            return
        buf["rows"].append((rec["channel"], rec["t"], rec["v"]))

    def _end(self, rec):
        tid = rec.get("track_id")
        buf = self._open.pop(tid, None)
        if buf is None:
            self.stats.errors.append((tid, "track_end without open track"))
            return
        self._store(tid, buf)

    def _store(self, tid, buf):
        meta = buf["meta"]
        if meta["start_epoch"] is None:
            # start event carried no epoch; anchor at the first sample
            meta["start_epoch"] = min((float(t) for _, t, _ in buf["rows"]), default=0.0)
        try:
            track = validate_track(_track_from_rows(meta, buf["rows"]))
            self.store.write_track(compress_track(track, self.budget))
            if self.keep_raw:
                self.store.write_raw_sidecar(track)
            self.stats.stored.append(tid)
        except (TrackdiffError, KeyError, ValueError) as exc:
            self.stats.errors.append((tid, f"{type(exc).__name__}: {exc}"))

    def close(self) -> StreamStats:
        for tid in list(self._open):
            self.stats.unterminated.append(tid)
            self._store(tid, self._open.pop(tid))
        return self.stats


def ingest_stream(source, store: TrackStore, budget: int, keep_raw=False) -> StreamStats:
    """Drain an iterable of ndjson lines (or parsed record dicts) into a store."""
    ing = StreamIngestor(store, budget, keep_raw=keep_raw)
    for item in source:
        if isinstance(item, (str, bytes)):
            ing.handle_line(item if isinstance(item, str) else item.decode("utf-8"))
        else:
            ing.handle_record(item)
    return ing.close()


def serve_stream_tcp(host, port, store: TrackStore, budget: int, max_connections=None,
                     keep_raw=False, ready_callback=None):
    """Accept ndjson stream connections on a TCP socket, one at a time.

    Emulates a broker subscription without the broker; each connection is
    drained through a StreamIngestor.  Stops after max_connections (None =
    run forever).  ready_callback receives the bound (host, port).
    """
    srv = socket.create_server((host, port))
    if ready_callback is not None:
        ready_callback(srv.getsockname()[:2])
    served = 0
    try:
        while max_connections is None or served < max_connections:
            conn, _ = srv.accept()
            with conn:
                reader = conn.makefile("r", encoding="utf-8")
                ingest_stream(reader, store, budget, keep_raw=keep_raw)
            served += 1
    finally:
        srv.close()
