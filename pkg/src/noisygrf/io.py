"""Reading and writing lattices, graphs, traces and tuning artifacts.

Lattice files: a header line ``H W`` followed by H rows of W entries in
{-1, +1}.  Graph files: a header line ``N`` followed by one ``i j`` pair per
line (0-indexed).  Blank lines and ``#`` comments are ignored.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ParseError
from .models import SpinLattice, UndirectedGraph, as_state


def _content_lines(path):
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line


def _ints(line, lineno, path, count=None):
    try:
        vals = [int(tok) for tok in line.split()]
    except ValueError:
        raise ParseError(f"expected integers, got {line!r}", lineno, path) from None
    if count is not None and len(vals) != count:
        raise ParseError(f"expected {count} values, got {len(vals)}", lineno, path)
    return vals


def load_lattice(path):
    lines = list(_content_lines(path))
    if not lines:
        raise ParseError("empty lattice file", None, path)
    lineno, header = lines[0]
    h, w = _ints(header, lineno, path, 2)
    if h < 1 or w < 1:
        raise ParseError("lattice dimensions must be >= 1", lineno, path)
    rows = lines[1:]
    if len(rows) != h:
        where = rows[h][0] if len(rows) > h else None
        raise ParseError(f"expected {h} rows, found {len(rows)}", where, path)
    spins = np.empty((h, w), dtype=np.int8)
    for r, (lineno, line) in enumerate(rows):
        vals = _ints(line, lineno, path, w)
        if any(v not in (-1, 1) for v in vals):
            raise ParseError("lattice entries must be -1 or +1", lineno, path)
        spins[r] = vals
    return SpinLattice(spins)


def save_lattice(lattice, path):
    spins = as_state(lattice)
    with open(path, "w") as fh:
        fh.write(f"{spins.shape[0]} {spins.shape[1]}\n")
        for row in spins:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def load_graph(path):
    lines = list(_content_lines(path))
    if not lines:
        raise ParseError("empty graph file", None, path)
    lineno, header = lines[0]
    (n,) = _ints(header, lineno, path, 1)
    if n < 1:
        raise ParseError("node count must be >= 1", lineno, path)
    adj = np.zeros((n, n), dtype=np.uint8)
    for lineno, line in lines[1:]:
        i, j = _ints(line, lineno, path, 2)
        if not (0 <= i < n and 0 <= j < n):
            raise ParseError(f"node index out of range 0..{n - 1}", lineno, path)
        if i == j:
            raise ParseError(f"self-loop on node {i}", lineno, path)
        if adj[i, j]:
            raise ParseError(f"duplicate edge ({min(i, j)}, {max(i, j)})", lineno, path)
        adj[i, j] = adj[j, i] = 1
    return UndirectedGraph(adj)


def save_graph(graph, path):
    g = graph if isinstance(graph, UndirectedGraph) else UndirectedGraph(graph)
    with open(path, "w") as fh:
        fh.write(f"{g.n_nodes}\n")
        for i, j in g.edges():
            fh.write(f"{i} {j}\n")


def load_data(kind, path):
    return load_lattice(path) if kind == "ising" else load_graph(path)


def fmt(x):
    """Shortest round-tripping float text, stable across runs."""
    return format(float(x), ".17g")


def write_trace_csv(trace, path):
    m = trace.states.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter"] + [f"theta_{k}" for k in range(m)] + ["accepted", "elapsed_ns"])
        for i, (theta, acc, ns) in enumerate(zip(trace.states, trace.accepted, trace.elapsed)):
            w.writerow([i] + [fmt(t) for t in theta] + [int(acc), int(ns)])


def read_trace_csv(path):
    from .samplers import Trace

    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    m = sum(1 for h in header if h.startswith("theta_"))
    arr = np.array(body, dtype=float) if body else np.zeros((0, m + 3))
    return Trace(arr[:, 1:1 + m], arr[:, 1 + m].astype(bool), arr[:, 2 + m].astype(np.int64))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def save_json(data, path):
    Path(path).write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, path) from None
