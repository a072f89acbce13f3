"""Symbolization of core buildings into morphological types and blocks
into configuration kinds.

Core-building features (key columns only) are projected to 2-D with a
deterministic principal-component projection, clustered with K-Means
(K=8), and each block's core-building types collapse to a dominant or
diverse configuration. Neighborhood representatives are the modal kind.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import shapely.geometry as sgeom
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import DataError
from .geoio import Neighborhood, write_feature_collection, polygon_to_geojson

N_TYPES = 8
GENERAL_DOMINANCE = 0.50
RESIDENTIAL_DOMINANCE = 0.60
MIN_DOMINANT_COUNT = 2


class PlanarProjection2D(BaseEstimator, TransformerMixin):
    """Deterministic 2-D principal-component projection.

    Components are sign-fixed by making each one's largest-magnitude
    loading positive. A neighborhood-preserving reducer can be swapped in
    behind the same fit/transform interface.
    """

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.shape[0] < 2 or X.shape[1] < 2:
            raise DataError("projection needs at least 2 samples and 2 columns")
        self.mean_ = X.mean(axis=0)
        centered = X - self.mean_
        cov = centered.T @ centered / len(X)
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(eigvals)[::-1]
        components = eigvecs[:, order[:2]].T
        for k in range(2):
            lead = np.argmax(np.abs(components[k]))
            if components[k, lead] < 0:
                components[k] = -components[k]
        self.components_ = components
        total = eigvals.sum()
        top = eigvals[order[:2]]
        self.explained_variance_ratio_ = (
            top / total if total > 0 else np.zeros(2)
        )
        self.rank_deficient_ = bool(top[1] <= max(total, 1.0) * 1e-12)
        return self

    def transform(self, X):
        if not hasattr(self, "components_"):
            raise NotFittedError("projection is not fitted")
        return (np.asarray(X, dtype=float) - self.mean_) @ self.components_.T


class KMeansTypes(BaseEstimator):
    """K-Means with k-means++ seeding and restarts; the best inertia wins.

    Empty clusters are re-seeded from the point farthest from its
    assigned center. Cluster ids are canonicalized by sorting centers on
    the first embedding axis (then the second), so type numbering is
    reproducible across runs.
    """

    def __init__(self, n_clusters: int = N_TYPES, n_restarts: int = 50,
                 max_iter: int = 300, seed: int = 0):
        self.n_clusters = n_clusters
        self.n_restarts = n_restarts
        self.max_iter = max_iter
        self.seed = seed

    def _plus_plus_init(self, X, rng):
        n = len(X)
        centers = [X[rng.integers(n)]]
        for _ in range(1, self.n_clusters):
            d2 = np.min(
                [((X - c) ** 2).sum(axis=1) for c in centers], axis=0
            )
            total = d2.sum()
            if total <= 0:
                centers.append(X[rng.integers(n)])
                continue
            probs = d2 / total
            centers.append(X[rng.choice(n, p=probs)])
        return np.array(centers)

    def _lloyd(self, X, centers):
        for _ in range(self.max_iter):
            d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            assign = d2.argmin(axis=1)
            new_centers = centers.copy()
            for k in range(self.n_clusters):
                members = X[assign == k]
                if len(members):
                    new_centers[k] = members.mean(axis=0)
                else:
                    worst = int(np.argmax(d2[np.arange(len(X)), assign]))
                    new_centers[k] = X[worst]
            if np.allclose(new_centers, centers, atol=1e-12):
                centers = new_centers
                break
            centers = new_centers
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        inertia = float(d2[np.arange(len(X)), assign].sum())
        return centers, assign, inertia

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if len(X) < self.n_clusters:
            raise DataError(
                f"need at least {self.n_clusters} samples, got {len(X)}"
            )
        rng = np.random.default_rng(self.seed)
        best = None
        for _ in range(self.n_restarts):
            centers = self._plus_plus_init(X, rng)
            centers, assign, inertia = self._lloyd(X, centers)
            if best is None or inertia < best[2]:
                best = (centers, assign, inertia)
        centers, assign, inertia = best
        order = np.lexsort((centers[:, 1], centers[:, 0]))
        relabel = np.empty(self.n_clusters, dtype=int)
        relabel[order] = np.arange(self.n_clusters)
        self.cluster_centers_ = centers[order]
        self.labels_ = relabel[assign]
        self.inertia_ = inertia
        return self

    def predict(self, X):
        if not hasattr(self, "cluster_centers_"):
            raise NotFittedError("clusterer is not fitted")
        X = np.asarray(X, dtype=float)
        d2 = ((X[:, None, :] - self.cluster_centers_[None, :, :]) ** 2).sum(axis=2)
        return d2.argmin(axis=1)

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_


@dataclass
class CoreBuildingType:
    type_id: int  # 1-based
    centroid: np.ndarray
    member_building_ids: list[str]


@dataclass
class ConfigurationType:
    block_id: str
    kind: str  # "dominant" | "diverse"
    type_id: int | None
    share: float
    core_count: int

    @property
    def display(self) -> str:
        return f"T{self.type_id}-Dom" if self.kind == "dominant" else "Diverse"


def dominance_threshold(
    function: str,
    general: float = GENERAL_DOMINANCE,
    residential: float = RESIDENTIAL_DOMINANCE,
) -> float:
    return residential if function == "residential" else general


def classify_configuration(
    block_id: str,
    core_types: list[int],
    function: str,
    general: float = GENERAL_DOMINANCE,
    residential: float = RESIDENTIAL_DOMINANCE,
) -> ConfigurationType:
    """Dominant(T) when one type holds at least the function's share
    threshold (inclusive) with at least two members; diverse otherwise.
    Frequency ties resolve to the lowest type id."""
    if not core_types:
        raise DataError(f"block {block_id!r} has no core buildings")
    counts: dict[int, int] = {}
    for t in core_types:
        counts[t] = counts.get(t, 0) + 1
    top_count = max(counts.values())
    top_type = min(t for t, c in counts.items() if c == top_count)
    share = top_count / len(core_types)
    threshold = dominance_threshold(function, general, residential)
    if share >= threshold and top_count >= MIN_DOMINANT_COUNT:
        return ConfigurationType(block_id, "dominant", top_type, share, len(core_types))
    return ConfigurationType(block_id, "diverse", None, share, len(core_types))


@dataclass
class NeighborhoodSummary:
    neighborhood_id: str
    name: str
    representative: str  # "T<k>-Dom" | "Diverse"
    histogram: dict[str, int] = field(default_factory=dict)
    n_blocks: int = 0


def assign_blocks_to_neighborhoods(blocks, neighborhoods: list[Neighborhood]):
    """Map block id -> neighborhood id by boundary-centroid containment;
    boundary ties go to the smallest neighborhood id."""
    shapes = [(n.id, n.boundary.to_shapely()) for n in neighborhoods]
    assignment: dict[str, str] = {}
    for block in blocks:
        c = sgeom.Point(block.boundary.centroid)
        hosts = sorted(nid for nid, shp in shapes if shp.covers(c))
        if hosts:
            assignment[block.id] = hosts[0]
    return assignment


def _kind_sort_key(kind: str):
    # dominant kinds ahead of diverse, then by type id
    if kind == "Diverse":
        return (1, 0)
    return (0, int(kind[1 : kind.index("-")]))


def regional_representative(
    neighborhoods: list[Neighborhood],
    configurations: list[ConfigurationType],
    assignment: dict[str, str],
) -> list[NeighborhoodSummary]:
    """Modal configuration kind per neighborhood; ties prefer dominant
    kinds over diverse, then the lowest type id. Neighborhoods with no
    blocks are omitted."""
    by_neigh: dict[str, list[str]] = {}
    for conf in configurations:
        nid = assignment.get(conf.block_id)
        if nid is not None:
            by_neigh.setdefault(nid, []).append(conf.display)
    out = []
    for n in sorted(neighborhoods, key=lambda x: x.id):
        kinds = by_neigh.get(n.id)
        if not kinds:
            continue
        histogram: dict[str, int] = {}
        for kind in kinds:
            histogram[kind] = histogram.get(kind, 0) + 1
        top = max(histogram.values())
        winner = min(
            (k for k, c in histogram.items() if c == top), key=_kind_sort_key
        )
        out.append(
            NeighborhoodSummary(
                neighborhood_id=n.id,
                name=n.name,
                representative=winner,
                histogram=dict(sorted(histogram.items())),
                n_blocks=len(kinds),
            )
        )
    return out


def write_building_types_csv(path, building_ids, type_labels) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["building_id", "type_id"])
        for bid, t in zip(building_ids, type_labels):
            writer.writerow([bid, int(t) + 1])


def write_configurations_geojson(path, blocks_by_id, configurations) -> None:
    features = []
    for conf in configurations:
        block = blocks_by_id[conf.block_id]
        features.append(
            {
                "type": "Feature",
                "geometry": polygon_to_geojson(block.boundary),
                "properties": {
                    "block_id": conf.block_id,
                    "kind": conf.display,
                    "share": conf.share,
                    "core_count": conf.core_count,
                },
            }
        )
    write_feature_collection(path, features)


def write_neighborhood_summary_csv(path, summaries: list[NeighborhoodSummary]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["neighborhood_id", "name", "representative", "n_blocks", "histogram"])
        for s in summaries:
            hist = ";".join(f"{k}:{v}" for k, v in s.histogram.items())
            writer.writerow([s.neighborhood_id, s.name, s.representative, s.n_blocks, hist])
