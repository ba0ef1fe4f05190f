"""JSON grid files and CSV voltage-sample files.

Grid file schema::

    {
      "meta":  {"name": "..."},
      "nodes": [{"id": 0, "kind": "substation" | "load"}, ...],
      "edges": [{"from": 0, "to": 4, "r": 0.12, "x": 0.09,
                 "closed": true, "switchable": false}, ...]
    }

``closed`` marks the operational forest; when no edge carries the key the
file declares a bare grid with no forest.  ``switchable`` (optional,
default false) marks lines with tie switches and only affects structural
bookkeeping.  Sample files are plain CSV, one column per load node id
(header row) and one row per snapshot of voltage deviations in per-unit;
floats are written in shortest round-trip form so a file round trip is
exact.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from ..errors import ParseError
from ..grid import LOAD, SUBSTATION, ForestConfig, GridGraph, GridNode, LineEdge
from ..powerflow import VoltageSamples

__all__ = [
    "parse_grid",
    "grid_to_dict",
    "write_grid",
    "write_samples",
    "read_samples",
]


def _require(doc: dict, key: str, types, location: str):
    if key not in doc:
        raise ParseError(f"missing required key {key!r}", location)
    val = doc[key]
    if not isinstance(val, types):
        raise ParseError(f"key {key!r} has wrong type {type(val).__name__}", location)
    return val


def _number(doc: dict, key: str, location: str) -> float:
    val = _require(doc, key, (int, float), location)
    if isinstance(val, bool):
        raise ParseError(f"key {key!r} has wrong type bool", location)
    return float(val)


def parse_grid(source: str | Path | dict) -> tuple[GridGraph, ForestConfig | None]:
    """Parse and validate a grid file (path, JSON text, or parsed dict).

    Syntax errors carry line/column; schema violations carry the document
    path of the offending entry; structural violations name the invariant.
    """
    label = ""
    if isinstance(source, dict):
        doc = source
    else:
        text = str(source)
        if isinstance(source, Path) or not text.lstrip().startswith("{"):
            label = text
            path = Path(text)
            if not path.exists():
                raise ParseError("file not found", label)
            text = path.read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", f"{label or '<string>'}:{exc.lineno}:{exc.colno}") from exc
    if not isinstance(doc, dict):
        raise ParseError("top-level document must be an object", label or "<document>")

    meta = doc.get("meta", {})
    name = meta.get("name", "") if isinstance(meta, dict) else ""

    nodes = []
    for i, entry in enumerate(_require(doc, "nodes", list, "document")):
        loc = f"nodes[{i}]"
        if not isinstance(entry, dict):
            raise ParseError("node entry must be an object", loc)
        nid = _require(entry, "id", int, loc)
        kind = _require(entry, "kind", str, loc)
        if kind not in (SUBSTATION, LOAD):
            raise ParseError(f"kind must be 'substation' or 'load', got {kind!r}", loc)
        nodes.append(GridNode(id=nid, kind=kind))

    edges = []
    closed = []
    declares_forest = False
    for i, entry in enumerate(_require(doc, "edges", list, "document")):
        loc = f"edges[{i}]"
        if not isinstance(entry, dict):
            raise ParseError("edge entry must be an object", loc)
        u = _require(entry, "from", int, loc)
        v = _require(entry, "to", int, loc)
        r = _number(entry, "r", loc)
        x = _number(entry, "x", loc)
        switchable = entry.get("switchable", False)
        if not isinstance(switchable, bool):
            raise ParseError("key 'switchable' must be a boolean", loc)
        if "closed" in entry:
            declares_forest = True
            if not isinstance(entry["closed"], bool):
                raise ParseError("key 'closed' must be a boolean", loc)
            if entry["closed"]:
                closed.append(i)
        edges.append(LineEdge(u=u, v=v, r=r, x=x, switchable=switchable))

    grid = GridGraph(nodes=tuple(nodes), edges=tuple(edges), name=name)
    forest = ForestConfig.from_closed_edges(grid, closed) if declares_forest else None
    return grid, forest


def grid_to_dict(grid: GridGraph, forest: ForestConfig | None = None) -> dict:
    closed = set(forest.closed_edges) if forest is not None else None
    edges = []
    for i, e in enumerate(grid.edges):
        entry = {"from": e.u, "to": e.v, "r": e.r, "x": e.x}
        if closed is not None:
            entry["closed"] = i in closed
        if e.switchable:
            entry["switchable"] = True
        edges.append(entry)
    return {
        "meta": {"name": grid.name},
        "nodes": [{"id": n.id, "kind": n.kind} for n in grid.nodes],
        "edges": edges,
    }


def write_grid(path: str | Path, grid: GridGraph, forest: ForestConfig | None = None) -> None:
    Path(path).write_text(json.dumps(grid_to_dict(grid, forest), indent=2) + "\n")


def write_samples(path: str | Path, samples: VoltageSamples) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([str(nid) for nid in samples.nodes])
        for row in samples.eps:
            writer.writerow([repr(float(v)) for v in row])


def read_samples(source: str | Path) -> VoltageSamples:
    """Read a voltage-sample CSV back into a batch (deviations only)."""
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read sample file: {exc}", str(source)) from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("sample file is empty", str(source)) from None
    try:
        nodes = tuple(int(h) for h in header)
    except ValueError:
        raise ParseError("header row must hold integer node ids", f"{source}:1") from None
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(nodes):
            raise ParseError(f"expected {len(nodes)} columns, got {len(row)}", f"{source}:{lineno}")
        try:
            rows.append([float(v) for v in row])
        except ValueError:
            raise ParseError("non-numeric sample value", f"{source}:{lineno}") from None
    if not rows:
        raise ParseError("sample file has a header but no samples", str(source))
    return VoltageSamples(nodes=nodes, eps=np.array(rows), theta=None)
