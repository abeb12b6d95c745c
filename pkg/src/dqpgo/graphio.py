"""Reading and writing planar pose graphs in g2o and TORO text formats.

g2o::

    VERTEX_SE2 id x y theta
    EDGE_SE2 i j dx dy dtheta I11 I12 I13 I22 I23 I33      # (x, y, theta) order

TORO::

    VERTEX2 id x y theta
    EDGE2 i j dx dy dtheta Ixx Ixy Iyy Itt Ixt Iyt
"""

import gzip
import io
from pathlib import Path

import numpy as np

from . import dq
from .graph import PoseGraph, is_connected

_VERTEX_TAGS = {"VERTEX_SE2": "g2o", "VERTEX2": "toro"}
_EDGE_TAGS = {"EDGE_SE2": "g2o", "EDGE2": "toro"}
# bookkeeping records that carry nothing the optimizer uses
_IGNORED_TAGS = {"EQUIV", "FIX"}


class GraphFormatError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _info_from_g2o(v):
    """g2o upper triangle over (x, y, theta) -> matrix over (theta, x, y)."""
    xx, xy, xt, yy, yt, tt = v
    return np.array([[tt, xt, yt], [xt, xx, xy], [yt, xy, yy]])


def _info_from_toro(v):
    xx, xy, yy, tt, xt, yt = v
    return np.array([[tt, xt, yt], [xt, xx, xy], [yt, xy, yy]])


def _info_to_g2o(om):
    return (om[1, 1], om[1, 2], om[1, 0], om[2, 2], om[2, 0], om[0, 0])


def _floats(tokens, lineno):
    try:
        return [float(t) for t in tokens]
    except ValueError as err:
        raise GraphFormatError(f"bad number ({err})", lineno) from None


def _int(token, lineno):
    try:
        return int(token)
    except ValueError:
        raise GraphFormatError(f"bad vertex id {token!r}", lineno) from None


def parse_graph(stream, fmt="auto"):
    """Parse a g2o or TORO planar pose graph from a text stream or string.

    ``fmt`` is ``"auto"`` (dispatch on the record tag), ``"g2o"`` or ``"toro"``.
    Raises :class:`GraphFormatError` for malformed content, non-positive-definite
    information matrices, unknown vertices, duplicate ids, or a disconnected graph.
    """
    if fmt not in ("auto", "g2o", "toro"):
        raise ValueError(f"unknown format {fmt!r}")
    if isinstance(stream, str):
        stream = io.StringIO(stream)

    vertices = {}
    raw_edges = []
    for lineno, line in enumerate(stream, start=1):
        tokens = line.split()
        if not tokens or tokens[0].startswith("#"):
            continue
        tag = tokens[0]
        if tag in _IGNORED_TAGS:
            continue
        kind = _VERTEX_TAGS.get(tag) or _EDGE_TAGS.get(tag)
        if kind is None:
            raise GraphFormatError(f"unsupported record {tag!r}", lineno)
        if fmt != "auto" and kind != fmt:
            raise GraphFormatError(f"{tag} record in a {fmt} file", lineno)

        if tag in _VERTEX_TAGS:
            if len(tokens) != 5:
                raise GraphFormatError(f"{tag} expects 4 fields, got {len(tokens) - 1}", lineno)
            vid = _int(tokens[1], lineno)
            if vid in vertices:
                raise GraphFormatError(f"duplicate vertex id {vid}", lineno)
            vertices[vid] = _floats(tokens[2:], lineno)
        else:
            if len(tokens) not in (6, 12):
                raise GraphFormatError(
                    f"{tag} expects 5 or 11 fields, got {len(tokens) - 1}", lineno
                )
            a, b = _int(tokens[1], lineno), _int(tokens[2], lineno)
            meas = _floats(tokens[3:6], lineno)
            if len(tokens) == 12:
                tri = _floats(tokens[6:], lineno)
                om = _info_from_g2o(tri) if kind == "g2o" else _info_from_toro(tri)
                if np.linalg.eigvalsh(om).min() <= 0.0:
                    raise GraphFormatError(
                        f"information matrix of edge {a}->{b} is not positive definite", lineno
                    )
            else:
                om = np.eye(3)
            if not np.all(np.isfinite(meas)):
                raise GraphFormatError(f"non-finite measurement on edge {a}->{b}", lineno)
            raw_edges.append((lineno, a, b, meas, om))

    if not vertices:
        raise GraphFormatError("no vertices found")

    ids = np.array(sorted(vertices), dtype=np.int64)
    index = {vid: k for k, vid in enumerate(ids)}
    xyt = np.array([vertices[v] for v in ids])
    if not np.all(np.isfinite(xyt)):
        raise GraphFormatError("non-finite vertex pose")
    nodes = dq.from_xyt(xyt)

    ei, ej, zs, oms = [], [], [], []
    for lineno, a, b, meas, om in raw_edges:
        if a not in index or b not in index:
            missing = a if a not in index else b
            raise GraphFormatError(f"edge refers to undeclared vertex {missing}", lineno)
        if a == b:
            raise GraphFormatError(f"self-loop on vertex {a}", lineno)
        ei.append(index[a])
        ej.append(index[b])
        zs.append(meas)
        oms.append(om)

    z = dq.from_xyt(np.array(zs).reshape(-1, 3))
    g = PoseGraph(nodes, ei, ej, z, np.array(oms).reshape(-1, 3, 3), ids=ids)
    if g.num_nodes > 1 and not is_connected(g):
        raise GraphFormatError("graph is not connected")
    return g


def load_graph(path, fmt="auto"):
    """Read a graph file; ``.gz`` files are decompressed transparently."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt") as fh:
        return parse_graph(fh, fmt)


def _num(v):
    return format(float(v), ".17g")


def write_graph(g, stream=None, fmt="g2o"):
    """Serialize ``g`` in g2o format with 17 significant digits.

    Returns the text when ``stream`` is None.
    """
    if fmt != "g2o":
        raise ValueError("only g2o output is supported")
    xyt = dq.to_xyt(g.nodes)
    zxyt = dq.to_xyt(g.z)
    lines = []
    for vid, p in zip(g.ids, xyt):
        lines.append(f"VERTEX_SE2 {vid} {_num(p[0])} {_num(p[1])} {_num(p[2])}")
    for i, j, p, om in zip(g.edge_i, g.edge_j, zxyt, g.omega):
        info = " ".join(_num(v) for v in _info_to_g2o(om))
        lines.append(
            f"EDGE_SE2 {g.ids[i]} {g.ids[j]} {_num(p[0])} {_num(p[1])} {_num(p[2])} {info}"
        )
    text = "\n".join(lines) + "\n"
    if stream is None:
        return text
    stream.write(text)
    return None


def save_graph(g, path):
    with open(path, "w") as fh:
        write_graph(g, fh)
