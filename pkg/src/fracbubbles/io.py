"""Deterministic report emission: canonical JSON, documented CSV formats,
atomic writes, and machine-readable run manifests.

Every float in a report renders through one fixed 17-significant-digit
format, so repeated runs with the same seed produce byte-identical files.
All formats are line-oriented text; there are no binary snapshots.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .errors import ConfigError
from .grid import Field, HalfSpaceGrid
from .params import FracParams

LEDGER_COLUMNS = ["alpha", "I_total", "I_background", "quantum_sum",
                  "defect", "residual", "min_separation"]


def format_float(x):
    """Fixed deterministic rendering: 17 significant digits (round-trips doubles)."""
    return format(float(x), ".17g")


def canonical_json(obj):
    """Canonical JSON text: sorted keys, fixed float formatting, trailing newline."""

    def render(o):
        if isinstance(o, dict):
            items = sorted(o.items(), key=lambda kv: kv[0])
            inner = ",".join(f"{json.dumps(str(k))}:{render(v)}" for k, v in items)
            return "{" + inner + "}"
        if isinstance(o, (list, tuple)):
            return "[" + ",".join(render(v) for v in o) + "]"
        if isinstance(o, np.ndarray):
            return render(o.tolist())
        if o is None:
            return "null"
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return format_float(o)
        return json.dumps(o)

    return render(obj) + "\n"


def write_text_atomic(path, text):
    """Write through a temp file and rename, so readers never see partial files."""
    tmp = f"{path}.{os.getpid()}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_json(path, obj):
    write_text_atomic(path, canonical_json(obj))


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, command, argv, inputs, outputs, seed, wall_time_s):
    """Run manifest: inputs hash, package version, wall time (a log, not a report;
    excluded from the byte-determinism guarantee because of the timing field)."""
    from . import __version__
    doc = {
        "command": command,
        "argv": list(argv),
        "inputs": {os.path.basename(p): sha256_file(p) for p in inputs if os.path.exists(p)},
        "outputs": sorted(os.path.basename(p) for p in outputs),
        "package_version": __version__,
        "seed": seed,
        "wall_time_s": wall_time_s,
    }
    write_text_atomic(path, canonical_json(doc))


# --- CSV formats -----------------------------------------------------------------
#
# Field snapshot ("field" kind): header rows carrying the grid spec, then one
# sample row per (boundary node, layer):
#
#   #fracbubbles-field v1
#   kind,full
#   n,1
#   gamma,0.25
#   L,8
#   N,512
#   Y,4
#   M,48
#   q,1.8333333333333333
#   x,y,u
#   -8,0,0.1234...
#
# Trace snapshot ("trace" kind): same preamble without Y/M/q, columns x,u.


def write_field_csv(path, fld):
    g = fld.grid
    lines = ["#fracbubbles-field v1",
             f"kind,{g.kind}",
             f"n,{g.params.n}",
             f"gamma,{format_float(g.params.gamma)}",
             f"L,{format_float(g.L)}",
             f"N,{g.N}",
             f"Y,{format_float(g.Y)}",
             f"M,{g.M}",
             f"q,{format_float(g.q)}",
             "x,y,u"]
    x, y = g.x, g.y
    u = fld.samples
    for i in range(g.N):
        for k in range(g.M + 1):
            lines.append(f"{format_float(x[i])},{format_float(y[k])},{format_float(u[i, k])}")
    write_text_atomic(path, "\n".join(lines) + "\n")


def write_trace_csv(path, x, u, params):
    lines = ["#fracbubbles-trace v1",
             "kind,trace",
             f"n,{params.n}",
             f"gamma,{format_float(params.gamma)}",
             "x,u"]
    for xi, ui in zip(x, u):
        lines.append(f"{format_float(xi)},{format_float(ui)}")
    write_text_atomic(path, "\n".join(lines) + "\n")


def _read_preamble(lines, magic, header):
    if not lines or not lines[0].startswith(magic):
        raise ConfigError(f"not a {magic} file")
    meta = {}
    i = 1
    while i < len(lines) and lines[i] != header:
        parts = lines[i].split(",")
        if len(parts) == 2 and not _is_number_row(parts):
            meta[parts[0]] = parts[1]
            i += 1
        else:
            break
    return meta, i


def _is_number_row(parts):
    try:
        float(parts[0])
        return True
    except ValueError:
        return False


def read_field_csv(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    meta, i = _read_preamble(lines, "#fracbubbles-field", "x,y,u")
    try:
        params = FracParams.create(int(meta["n"]), float(meta["gamma"]))
        grid = HalfSpaceGrid(params=params, L=float(meta["L"]), N=int(meta["N"]),
                             Y=float(meta["Y"]), M=int(meta["M"]), q=float(meta["q"]),
                             kind=meta["kind"])
    except KeyError as exc:
        raise ConfigError(f"field file missing header key: {exc.args[0]}") from exc
    if lines[i] != "x,y,u":
        raise ConfigError("field file missing the x,y,u column header")
    rows = lines[i + 1:]
    if len(rows) != grid.N * (grid.M + 1):
        raise ConfigError(f"field file has {len(rows)} sample rows, "
                          f"expected {grid.N * (grid.M + 1)}")
    u = np.empty((grid.N, grid.M + 1))
    idx = 0
    for r in range(grid.N):
        for k in range(grid.M + 1):
            u[r, k] = float(rows[idx].split(",")[2])
            idx += 1
    return Field(grid, u)


def read_trace_csv(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    meta, i = _read_preamble(lines, "#fracbubbles-trace", "x,u")
    try:
        params = FracParams.create(int(meta["n"]), float(meta["gamma"]))
    except KeyError as exc:
        raise ConfigError(f"trace file missing header key: {exc.args[0]}") from exc
    if lines[i] != "x,u":
        raise ConfigError("trace file missing the x,u column header")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[i + 1:]])
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 8:
        raise ConfigError("trace file needs at least 8 rows of x,u pairs")
    return params, data[:, 0], data[:, 1]


def write_ledger_csv(path, rows):
    """Schedule ledger with exactly the documented 7 columns."""
    lines = [",".join(LEDGER_COLUMNS)]
    for row in rows:
        d = row.as_dict()
        lines.append(",".join(
            str(d["alpha"]) if c == "alpha" else format_float(d[c])
            for c in LEDGER_COLUMNS))
    write_text_atomic(path, "\n".join(lines) + "\n")


def read_points_csv(path, n):
    """Target points for the extend command: columns x1[,..,xn],y with a header."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ConfigError("empty points file")
    start = 0
    if not _is_number_row(lines[0].split(",")):
        start = 1
    pts = []
    for ln in lines[start:]:
        vals = [float(v) for v in ln.split(",")]
        if len(vals) != n + 1:
            raise ConfigError(f"points row has {len(vals)} columns, expected {n + 1} "
                              f"(x1..x{n}, y)")
        pts.append(vals)
    return np.array(pts)


def load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
