"""Binary snapshot files and the metrics CSV.

Snapshot format: 8-byte magic "LFPSNP01", an unsigned 64-bit little-endian
header length, a UTF-8 JSON header
  {kind: "field"|"operator", h, gamma, t, grid: {n, L}, dtype, layout},
then the raw payload: fields as real 64-bit, operators as interleaved
re/im 64-bit (complex128), row-major with x as the major axis.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..phasespace import PhaseGrid, SymbolField, build_grid
from ..weyl import Operator

MAGIC = b"LFPSNP01"

METRICS_HEADER = "t,trace_dist,hs_dist,trace_re,trace_im,herm_defect,min_eig,mass,l1_norm,w11_eps"


def write_snapshot(path, kind: str, h: float, gamma: float, t: float,
                   grid: PhaseGrid, array: np.ndarray) -> None:
    if kind == "field":
        payload = np.ascontiguousarray(array, dtype="<f8")
        dtype = "f64le"
    elif kind == "operator":
        payload = np.ascontiguousarray(array, dtype="<c16")
        dtype = "c128le"
    else:
        raise ValueError(f"unknown snapshot kind {kind!r}")
    header = {
        "kind": kind,
        "h": h,
        "gamma": gamma,
        "t": t,
        "grid": {"n": grid.n_points, "L": grid.halfwidth},
        "dtype": dtype,
        "layout": "row-major",
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        f.write(payload.tobytes())


def read_snapshot(path):
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode("utf-8"))
        raw = f.read()
    n = header["grid"]["n"]
    if header["dtype"] == "f64le":
        arr = np.frombuffer(raw, dtype="<f8").reshape(n, n)
    elif header["dtype"] == "c128le":
        arr = np.frombuffer(raw, dtype="<c16").reshape(n, n)
    else:
        raise ValueError(f"unknown dtype {header['dtype']!r}")
    return header, arr.copy()


def snapshot_grid(header) -> PhaseGrid:
    return build_grid(header["grid"]["n"], header["grid"]["L"], header["h"])


def load_field(path) -> SymbolField:
    header, arr = read_snapshot(path)
    if header["kind"] != "field":
        raise ValueError(f"{path} is not a field snapshot")
    return SymbolField(snapshot_grid(header), arr, time_tag=header["t"])


def load_operator(path) -> Operator:
    header, arr = read_snapshot(path)
    if header["kind"] != "operator":
        raise ValueError(f"{path} is not an operator snapshot")
    return Operator(snapshot_grid(header), arr)


def _g17(v: float) -> str:
    return f"{v:.17g}"


class MetricsWriter:
    """Accumulates metric rows (strictly increasing t) and renders the CSV."""

    def __init__(self):
        self.rows = []

    def add(self, t, trace_dist, hs_dist, trace, herm_defect, min_eig, mass, l1_norm, w11_eps):
        if self.rows and t <= self.rows[-1][0]:
            raise ValueError("metric rows must be strictly increasing in t")
        self.rows.append((t, trace_dist, hs_dist, trace.real, trace.imag,
                          herm_defect, min_eig, mass, l1_norm, w11_eps))

    def render(self) -> str:
        lines = [METRICS_HEADER]
        for row in self.rows:
            lines.append(",".join(_g17(v) for v in row))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.render(), encoding="utf-8")


def read_metrics(path):
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if text[0] != METRICS_HEADER:
        raise ValueError(f"{path}: unexpected metrics header {text[0]!r}")
    cols = METRICS_HEADER.split(",")
    out = {c: [] for c in cols}
    for line in text[1:]:
        for c, v in zip(cols, line.split(",")):
            out[c].append(float(v))
    return {c: np.array(v) for c, v in out.items()}
