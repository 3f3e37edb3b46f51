"""Persistence: columnar binary containers, deterministic CSV and plot data.

Columnar container layout (all little-endian)::

    magic    8 bytes   b"SPDCOL01"
    hlen     uint32    length of the JSON header in bytes
    header   hlen      UTF-8 JSON: {"kind", "meta", "columns": [{"name", "shape"}]}
    blocks             float64, row-major, in header column order

CSV tables start with one ``# generated <UTC timestamp>`` line, which is the
only part of the file that differs between reruns.
"""

import csv
import io as _io
import json
import struct
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

MAGIC = b"SPDCOL01"


def write_columnar(path, kind, columns, meta=None):
    """Write named float64 arrays; ``columns`` is an ordered mapping."""
    spec = []
    for name, arr in columns.items():
        spec.append({"name": name, "shape": list(np.shape(arr))})
    header = json.dumps({"kind": kind, "meta": meta or {}, "columns": spec}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for arr in columns.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_columnar(path):
    """Returns ``(kind, meta, columns)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a columnar container")
    (hlen,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + hlen])
    offset = 12 + hlen
    cols = {}
    for c in header["columns"]:
        shape = tuple(c["shape"])
        count = int(np.prod(shape)) if shape else 1
        cols[c["name"]] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        offset += 8 * count
    if offset != len(data):
        raise ValueError(f"{path}: trailing bytes after last block")
    return header["kind"], header["meta"], cols


def save_trajectories(path, pair):
    meta = {"n": pair.n, "steps": pair.steps, "dt": pair.dt, "seed": pair.seed,
            "model": pair.model_id, "graph": pair.graph_id}
    write_columnar(path, "trajectories", {
        "media": pair.media, "xi": pair.xi,
        "theta_sparse": pair.theta_sparse, "theta_dense": pair.theta_dense,
    }, meta)


def load_trajectories(path):
    from .dynamics import TrajectoryPair

    kind, meta, c = read_columnar(path)
    if kind != "trajectories":
        raise ValueError(f"{path}: holds {kind!r}, not trajectories")
    return TrajectoryPair(n=meta["n"], steps=meta["steps"], dt=meta["dt"], theta_sparse=c["theta_sparse"],
                          theta_dense=c["theta_dense"], media=c["media"], xi=c["xi"], seed=meta["seed"],
                          model_id=meta["model"], graph_id=meta["graph"])


def save_density(path, flow):
    meta = {"periodic": flow.periodic, "dt_pde": flow.dt_pde, "model": flow.meta.get("model", "")}
    write_columnar(path, "density", {
        "edges": flow.edges, "atoms": flow.atoms, "atom_weights": flow.atom_weights,
        "times": flow.times, "q": flow.q, "mass_error": flow.mass_error,
    }, meta)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(rows, columns):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, columns, timestamp=True):
    body = csv_text(rows, columns)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if timestamp:
            fh.write(f"# generated {datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
        fh.write(body)


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def strip_timestamp(text):
    return "".join(ln for ln in text.splitlines(keepends=True) if not ln.startswith("# generated"))


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def downsampled_rows(pair, every=10, particles=16):
    """Long-format rows (t, particle, sparse, dense) on a thinned grid."""
    rows = []
    idx = range(0, pair.steps + 1, max(1, every))
    for k in idx:
        for i in range(min(particles, pair.n)):
            rows.append({"t": k * pair.dt, "particle": i,
                         "sparse": pair.theta_sparse[i, k], "dense": pair.theta_dense[i, k]})
    return rows


def write_plot_data(path, x, y, comment=None):
    """Two whitespace-separated columns, gnuplot style."""
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for a, b in zip(np.ravel(x), np.ravel(y)):
            fh.write(f"{float(a)!r} {float(b)!r}\n")
