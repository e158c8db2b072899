"""Joint graphs and the multi-hop adjacency matrices used by the graph layers.

The layout (joint count, named groups, edge pairs) is data, loaded from a
small versioned text file; the bundled ``body52`` layout covers two 21-joint
hands, a 5-joint face and a 5-joint arm/neck chain.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

LAYOUT_HEADER = "skeleton-layout"
LAYOUT_VERSION = 1

UNREACHABLE = np.inf  # hop distance between disconnected joints


class LayoutError(ValueError):
    """Malformed joint-layout file or inconsistent layout definition."""


@dataclass(frozen=True)
class JointLayout:
    """An undirected joint graph with named joint groups and anchor joints."""

    joint_count: int
    edges: tuple
    groups: dict = field(default_factory=dict)
    anchors: dict = field(default_factory=dict)

    def __post_init__(self):
        for i, j in self.edges:
            if i == j:
                raise LayoutError(f"self-loop on joint {i} in raw edge list")
            if not (0 <= i < self.joint_count and 0 <= j < self.joint_count):
                raise LayoutError(f"edge ({i}, {j}) references an invalid joint")
        for name, members in self.groups.items():
            bad = [m for m in members if not 0 <= m < self.joint_count]
            if bad:
                raise LayoutError(f"group {name!r} references invalid joints {bad}")
        for name, joint in self.anchors.items():
            if not 0 <= joint < self.joint_count:
                raise LayoutError(f"anchor {name!r} references invalid joint {joint}")

    def neighbor_lists(self) -> list:
        adj = [[] for _ in range(self.joint_count)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return adj

    def anchor(self, name: str) -> int:
        if name not in self.anchors:
            raise LayoutError(f"layout defines no {name!r} anchor joint")
        return self.anchors[name]


@dataclass(frozen=True)
class ScaleAdjacency:
    """0/1 matrix linking joints at exact hop distance k, plus self-loops."""

    k: int
    matrix: np.ndarray  # (V, V) of {0., 1.}


@dataclass(frozen=True)
class BlockAdjacency:
    """The scale-k adjacency tiled over every pair of the m clip frames."""

    k: int
    m: int
    matrix: np.ndarray      # (mV, mV) of {0., 1.}
    normalized: np.ndarray  # entry [i][j] = matrix[i][j] / sqrt(deg_i * deg_j)


def parse_layout(text: str) -> JointLayout:
    joint_count = None
    edges = []
    groups: dict = {}
    anchors: dict = {}
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise LayoutError("empty layout file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != LAYOUT_HEADER or not head[1].startswith("v"):
        raise LayoutError(f"bad layout header line: {lines[0]!r}")
    if head[1] != f"v{LAYOUT_VERSION}":
        raise LayoutError(f"unsupported layout version {head[1]}")
    for line in lines[1:]:
        fields = line.split()
        kind = fields[0]
        if kind == "joints":
            joint_count = int(fields[1])
        elif kind == "group":
            groups[fields[1]] = tuple(int(f) for f in fields[2:])
        elif kind == "edge":
            edges.append((int(fields[1]), int(fields[2])))
        elif kind == "anchor":
            anchors[fields[1]] = int(fields[2])
        else:
            raise LayoutError(f"unknown layout directive {kind!r}")
    if joint_count is None:
        raise LayoutError("layout file missing 'joints' line")
    return JointLayout(joint_count, tuple(edges), groups, anchors)


def load_layout(path: Union[str, Path]) -> JointLayout:
    return parse_layout(Path(path).read_text())


def format_layout(layout: JointLayout) -> str:
    lines = [f"{LAYOUT_HEADER} v{LAYOUT_VERSION}", f"joints {layout.joint_count}"]
    for name, members in layout.groups.items():
        lines.append(f"group {name} " + " ".join(str(m) for m in members))
    for name, joint in layout.anchors.items():
        lines.append(f"anchor {name} {joint}")
    for i, j in layout.edges:
        lines.append(f"edge {i} {j}")
    return "\n".join(lines) + "\n"


def save_layout(layout: JointLayout, path: Union[str, Path]) -> None:
    Path(path).write_text(format_layout(layout))


def default_layout() -> JointLayout:
    """The bundled 52-joint layout (42 hand, 5 face, 5 arm/neck joints)."""
    text = importlib.resources.files("cslr.layouts").joinpath(
        "body52.layout").read_text()
    return parse_layout(text)


def shortest_path_distances(layout: JointLayout) -> np.ndarray:
    """All-pairs BFS hop counts; unreachable pairs are infinite."""
    v = layout.joint_count
    adj = layout.neighbor_lists()
    dist = np.full((v, v), UNREACHABLE, dtype=np.float64)
    for source in range(v):
        dist[source, source] = 0.0
        frontier = [source]
        d = 0
        while frontier:
            d += 1
            nxt = []
            for node in frontier:
                for nb in adj[node]:
                    if dist[source, nb] == UNREACHABLE:
                        dist[source, nb] = d
                        nxt.append(nb)
            frontier = nxt
    return dist


def build_scale_adjacency(layout: JointLayout, k: int,
                          distances: Optional[np.ndarray] = None) -> ScaleAdjacency:
    """Joints at exact hop distance k, with self-loops added.

    A k beyond the graph diameter leaves only the identity.
    """
    if k < 1:
        raise ValueError(f"scale must be at least 1, got {k}")
    if distances is None:
        distances = shortest_path_distances(layout)
    matrix = (distances == k).astype(np.float64)
    np.fill_diagonal(matrix, 1.0)
    return ScaleAdjacency(k=k, matrix=matrix)


def tile_block(adj: ScaleAdjacency, m: int) -> BlockAdjacency:
    """Tile the scale adjacency over an m-frame clip and normalize it.

    Entry [a*V+i][b*V+j] equals adj.matrix[i][j] for every frame pair (a, b):
    a joint connects to its k-hop neighbors, and to its own copy, in all
    m frames.
    """
    if m < 1:
        raise ValueError(f"frames per clip must be at least 1, got {m}")
    tiled = np.tile(adj.matrix, (m, m))
    return BlockAdjacency(k=adj.k, m=m, matrix=tiled,
                          normalized=sym_normalize(tiled))


def sym_normalize(matrix: np.ndarray) -> np.ndarray:
    """Entrywise A[i][j] / sqrt(deg_i * deg_j) with degrees the row sums.

    Computed literally from that expression (degree product first) so the
    entries equal it exactly, not merely to rounding.
    """
    degrees = matrix.sum(axis=1)
    if np.any(degrees <= 0):
        raise AssertionError("zero-degree row despite self-loops")
    return matrix / np.sqrt(np.outer(degrees, degrees))


def multiscale_normalized(layout: JointLayout, scales: int, m: int) -> list:
    """Normalized per-frame matrices for k = 1..scales, at clip length 1.

    Because the block tiling repeats the same V x V pattern in every frame
    pair, the normalized mV x mV matrix factors as (1/m) * ones(m, m) kron
    the normalized V x V matrix; layers exploit that, so only the V x V
    factors are materialized here.
    """
    distances = shortest_path_distances(layout)
    return [
        sym_normalize(build_scale_adjacency(layout, k, distances).matrix)
        for k in range(1, scales + 1)
    ]
