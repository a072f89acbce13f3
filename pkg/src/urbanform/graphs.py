"""Weighted morphological graphs: one per eligible block.

Nodes are building centroids, edges come from a Delaunay triangulation
of the centroids, and edge weights are centroid distances in meters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .errors import DataError
from .geoio import Block, Building
from .metrics import FeatureTable

DUPLICATE_TOLERANCE = 1e-6


def delaunay_edges(points) -> tuple[list[tuple[int, int]], bool]:
    """Delaunay edge set over 2-D points.

    Points are pre-sorted lexicographically before triangulating so
    cocircular ties resolve the same way regardless of input order.
    Collinear inputs fall back to a nearest-neighbor path along the line
    (returned flag is True in that case).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4:
        raise DataError("triangulation needs at least 4 two-dimensional points")
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(dist, np.inf)
    if (dist < DUPLICATE_TOLERANCE).any():
        i, j = np.argwhere(dist < DUPLICATE_TOLERANCE)[0]
        raise DataError(f"duplicate points at indices {i} and {j}")

    order = np.lexsort((pts[:, 1], pts[:, 0]))
    # center on the mean: the edge set is translation-invariant and qhull
    # keeps full precision on small local coordinates
    sorted_pts = pts[order] - pts.mean(axis=0)
    try:
        tri = Delaunay(sorted_pts)
        if tri.simplices.size == 0:
            raise QhullError("empty triangulation")
        edges = set()
        for simplex in tri.simplices:
            a, b, c = (int(order[k]) for k in simplex)
            edges.add((min(a, b), max(a, b)))
            edges.add((min(b, c), max(b, c)))
            edges.add((min(a, c), max(a, c)))
        return sorted(edges), False
    except QhullError:
        # collinear: connect consecutive points along the line
        path = [(int(order[k]), int(order[k + 1])) for k in range(len(order) - 1)]
        return sorted(tuple(sorted(e)) for e in path), True


@dataclass
class MorphGraph:
    """g = (nodes, edges, features, weights) for one functional unit."""

    block_id: str
    node_ids: list[str]
    points: np.ndarray  # (n, 2) centroids
    edges: list[tuple[int, int]]
    weights: np.ndarray  # (|E|,) centroid distances, meters
    features: np.ndarray  # (n, 22) raw morphometrics
    label: str
    degenerate_layout: bool = False

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_nodes))
        for (i, j) in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def is_connected(self) -> bool:
        n = self.n_nodes
        seen = {0}
        stack = [0]
        adj: dict[int, list[int]] = {i: [] for i in range(n)}
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == n


def build_graph(block: Block, buildings: list[Building], features: FeatureTable) -> MorphGraph:
    """Build the block's graph; raises on ineligible blocks (< 4 buildings)."""
    if not block.eligible:
        raise DataError(
            f"block {block.id!r} has {len(block.building_ids)} buildings; needs 4"
        )
    by_id = {b.id: b for b in buildings}
    node_ids = sorted(block.building_ids)
    points = np.array([by_id[i].footprint.centroid for i in node_ids])
    edges, degenerate = delaunay_edges(points)
    weights = np.array(
        [float(np.hypot(*(points[i] - points[j]))) for i, j in edges]
    )
    return MorphGraph(
        block_id=block.id,
        node_ids=node_ids,
        points=points,
        edges=edges,
        weights=weights,
        features=features.rows_for(node_ids),
        label=block.function,
        degenerate_layout=degenerate,
    )


def affinity(weights: np.ndarray) -> np.ndarray:
    """Gaussian affinity exp(-d^2 / sigma^2) with sigma the median edge
    length of the graph; values lie in (0, 1] and decrease with distance."""
    w = np.asarray(weights, dtype=float)
    if (w <= 0).any():
        raise DataError("edge weights must be positive")
    sigma = float(np.median(w))
    return np.exp(-(w**2) / sigma**2)


def affinity_matrix(graph: MorphGraph) -> np.ndarray:
    """Symmetric (n, n) matrix of edge affinities, zero elsewhere."""
    coeffs = affinity(graph.weights)
    a = np.zeros((graph.n_nodes, graph.n_nodes))
    for (i, j), c in zip(graph.edges, coeffs):
        a[i, j] = a[j, i] = c
    return a


def write_graphs_jsonl(path, graphs: list[MorphGraph]) -> None:
    """One JSON record per block, stable field order for diffing."""
    with open(path, "w") as fh:
        for g in graphs:
            record = {
                "block_id": g.block_id,
                "label": g.label,
                "node_ids": g.node_ids,
                "points": [[float(x), float(y)] for x, y in g.points],
                "edges": [
                    {"u": g.node_ids[i], "v": g.node_ids[j], "weight": float(w)}
                    for (i, j), w in zip(g.edges, g.weights)
                ],
                "features": [[float(v) for v in row] for row in g.features],
                "degenerate_layout": g.degenerate_layout,
            }
            fh.write(json.dumps(record, separators=(",", ":")))
            fh.write("\n")


def read_graphs_jsonl(path) -> list[MorphGraph]:
    graphs = []
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            node_index = {bid: i for i, bid in enumerate(rec["node_ids"])}
            edges = [
                (node_index[e["u"]], node_index[e["v"]]) for e in rec["edges"]
            ]
            graphs.append(
                MorphGraph(
                    block_id=rec["block_id"],
                    node_ids=rec["node_ids"],
                    points=np.array(rec["points"]),
                    edges=[tuple(sorted(e)) for e in edges],
                    weights=np.array([e["weight"] for e in rec["edges"]]),
                    features=np.array(rec["features"]),
                    label=rec["label"],
                    degenerate_layout=rec["degenerate_layout"],
                )
            )
    return graphs
