"""Recorded update events of a Harris-type construction.

Binary records are 17 bytes, little-endian: vertex u32, time f64, kind u8,
aux u32.  ``aux`` is the source vertex for copy events and unused (0) for
branching events.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

VERTICAL_COPY, HORIZONTAL_COPY, BRANCH = 0, 1, 2
KIND_NAMES = {VERTICAL_COPY: "vertical-copy", HORIZONTAL_COPY: "horizontal-copy", BRANCH: "branch"}

RECORD_DTYPE = np.dtype([("vertex", "<u4"), ("time", "<f8"), ("kind", "u1"), ("aux", "<u4")])
assert RECORD_DTYPE.itemsize == 17


@dataclass
class EventLog:
    records: np.ndarray  # RECORD_DTYPE, sorted by time
    n_vertices: int
    t_end: float

    def __post_init__(self):
        self.records = np.asarray(self.records, dtype=RECORD_DTYPE)

    def __len__(self) -> int:
        return len(self.records)

    @classmethod
    def from_arrays(cls, vertex, time, kind, aux, n_vertices: int, t_end: float) -> "EventLog":
        rec = np.empty(len(vertex), dtype=RECORD_DTYPE)
        rec["vertex"], rec["time"], rec["kind"], rec["aux"] = vertex, time, kind, aux
        return cls(rec, n_vertices, t_end)

    def to_bytes(self) -> bytes:
        return self.records.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, n_vertices: int, t_end: float) -> "EventLog":
        if len(data) % RECORD_DTYPE.itemsize:
            raise ValueError("truncated event log")
        log = cls(np.frombuffer(data, dtype=RECORD_DTYPE).copy(), n_vertices, t_end)
        log.validate()
        return log

    def write(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def read(cls, path, n_vertices: int, t_end: float) -> "EventLog":
        return cls.from_bytes(Path(path).read_bytes(), n_vertices, t_end)

    def validate(self, g=None) -> None:
        """Raise ValueError when records cannot belong to a graph with these vertices."""
        r = self.records
        if len(r) == 0:
            return
        if r["vertex"].max() >= self.n_vertices or r["aux"].max() >= self.n_vertices:
            raise ValueError("event log refers to vertices outside the graph")
        if np.any(np.diff(r["time"]) < 0) or r["time"].max() > self.t_end:
            raise ValueError("event log times are not ordered within [0, t_end]")
        if np.any(r["kind"] > BRANCH):
            raise ValueError("unknown event kind")
        if g is not None:
            if g.n_vertices != self.n_vertices:
                raise ValueError("event log and graph disagree on the vertex count")
            N = g.N
            copy = r["kind"] != BRANCH
            hx = r["vertex"][copy].astype(np.int64) // N
            hy = r["aux"][copy].astype(np.int64) // N
            vert = r["kind"][copy] == VERTICAL_COPY
            if np.any(hx[vert] != hy[vert]):
                raise ValueError("vertical copy between different hosts")
            H = g.n_hosts
            edges = np.repeat(np.arange(H), g.degree) * H + g.indices
            if not np.all(np.isin(hx[~vert] * H + hy[~vert], edges)):
                raise ValueError("horizontal copy between non-adjacent hosts")
