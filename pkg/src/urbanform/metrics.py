"""Building-scale morphometrics: 22 indicators of size, orientation,
shape, and density, plus the feature-matrix standardizer.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import DataError, DegenerateGeometryError
from .geometry import (
    Polygon,
    boundary_radii,
    convex_hull,
    fold_angle,
    longest_chord,
    min_bounding_rect,
    polygon_basics,
    ray_radii,
    smallest_enclosing_circle,
)
from .tessellation import TessellationCell

FEATURE_NAMES = (
    "area",
    "perimeter",
    "longest_chord",
    "mean_radius",
    "sbro",
    "lco",
    "bisector_orientation",
    "weighted_orientation",
    "complexity",
    "ipq",
    "fractality",
    "max_circularity",
    "gibbs",
    "elongation",
    "ellipticity",
    "concavity",
    "dcm",
    "exchange",
    "bci",
    "mu11",
    "eccentricity",
    "covered_area_ratio",
)

N_FEATURES = len(FEATURE_NAMES)

BCI_RAYS = 16
EXCHANGE_ARC_STEP = 1e-3  # radians per circle segment


def size_metrics(p: Polygon) -> tuple[float, float, float, float]:
    """(area, perimeter, longest chord length, mean vertex radius)."""
    a, per, _, radii = polygon_basics(p)
    l_max, _, _ = longest_chord(p)
    return a, per, l_max, float(radii.mean())


def _weighted_edge_orientation(p: Polygon) -> float:
    """Length-weighted mean edge orientation folded into [0, 90).

    Computed as a circular mean on the 90-degree-periodic fold (angles
    multiplied by four), so perpendicular walls reinforce instead of
    cancelling.
    """
    ring = p.exterior
    d = np.roll(ring, -1, axis=0) - ring
    lengths = np.hypot(d[:, 0], d[:, 1])
    theta = np.arctan2(d[:, 1], d[:, 0])
    sx = float((lengths * np.cos(4 * theta)).sum())
    sy = float((lengths * np.sin(4 * theta)).sum())
    if math.hypot(sx, sy) < 1e-12 * lengths.sum():
        return 0.0
    return fold_angle(math.degrees(math.atan2(sy, sx)) / 4.0, 90.0)


def orientation_metrics(p: Polygon) -> tuple[float, float, float, float]:
    """(sbro, lco, bisector, weighted): bounding-rectangle orientation in
    [0, 90), longest-chord orientation in [0, 180), its perpendicular
    bisector in [0, 180), and the length-weighted wall orientation in
    [0, 90)."""
    _, _, sbro = min_bounding_rect(p)
    _, lco, _ = longest_chord(p)
    bisector = fold_angle(lco + 90.0, 180.0)
    return sbro, lco, bisector, _weighted_edge_orientation(p)


def _circle_polygon(center: np.ndarray, radius: float, arc_step: float):
    import shapely.geometry as sgeom

    n = int(math.ceil(2.0 * math.pi / arc_step))
    ang = np.arange(n) * (2.0 * math.pi / n)
    pts = np.column_stack(
        [center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)]
    )
    return sgeom.Polygon(pts)


def exchange_index(p: Polygon) -> float:
    """1 - overlap share between the polygon and its equal-area circle
    centered on the centroid."""
    a = p.area
    c = p.centroid
    r = math.sqrt(a / math.pi)
    circle = _circle_polygon(c, r, EXCHANGE_ARC_STEP)
    inter = p.to_shapely().intersection(circle).area
    return 1.0 - inter / (math.pi * r * r)


def boyce_clark_index(radii: np.ndarray) -> float:
    """Sum of absolute percentage deviations of the radii from the
    uniform share (0 for a circle)."""
    n = len(radii)
    share = 100.0 * radii / radii.sum()
    return float(np.abs(share - 100.0 / n).sum())


@dataclass
class ShapeMetrics:
    complexity: float
    ipq: float
    fractality: float
    max_circularity: float
    gibbs: float
    elongation: float
    ellipticity: float
    concavity: float
    dcm: float
    exchange: float
    bci: float
    mu11: float
    eccentricity: float
    flags: list[str] = field(default_factory=list)

    def as_tuple(self):
        return (
            self.complexity,
            self.ipq,
            self.fractality,
            self.max_circularity,
            self.gibbs,
            self.elongation,
            self.ellipticity,
            self.concavity,
            self.dcm,
            self.exchange,
            self.bci,
            self.mu11,
            self.eccentricity,
        )


def shape_metrics(p: Polygon) -> ShapeMetrics:
    a, per, centroid, vradii = polygon_basics(p)
    if a <= 1.0:
        raise DegenerateGeometryError(
            "fractality is only defined for footprints larger than 1 m^2"
        )
    l_max, _, l_width = longest_chord(p)
    l_sbr, w_sbr, _ = min_bounding_rect(p)
    if w_sbr <= 0 or l_max <= 0:
        raise DegenerateGeometryError("degenerate bounding geometry")
    hull_area = convex_hull(p).area
    _, scc_radius = smallest_enclosing_circle(p.exterior)
    scc_area = math.pi * scc_radius**2

    flags: list[str] = []
    try:
        r_max, r_min = boundary_radii(p)
        radii = ray_radii(p, BCI_RAYS)
    except DegenerateGeometryError:
        # centroid outside the polygon: fall back to vertex radii
        flags.append("centroid_outside_vertex_radii")
        r_max = float(vradii.max())
        r_min = float(vradii.min())
        radii = vradii
    if r_min <= 0:
        raise DegenerateGeometryError("centroid lies on the boundary")

    centered = p.exterior - centroid
    mu11 = float((centered[:, 0] * centered[:, 1]).sum())

    return ShapeMetrics(
        complexity=a / per,
        ipq=4.0 * math.pi * a / per**2,
        fractality=1.0 - math.log(a) / (2.0 * math.log(per)),
        max_circularity=math.sqrt(a / math.pi) / r_max,
        gibbs=4.0 * a / (math.pi * l_max**2),
        elongation=l_sbr / w_sbr,
        ellipticity=l_width / l_max,
        concavity=a / hull_area,
        dcm=a / scc_area,
        exchange=exchange_index(p),
        bci=boyce_clark_index(radii),
        mu11=mu11,
        eccentricity=r_max / r_min,
        flags=flags,
    )


def density_metric(building, cell: TessellationCell) -> float:
    """Footprint share of the tessellation cell, in (0, 1]."""
    if building.id != cell.building_id:
        raise DataError(
            f"cell belongs to {cell.building_id!r}, not {building.id!r}"
        )
    return building.footprint.area / cell.area


def feature_vector(building, cell: TessellationCell) -> tuple[np.ndarray, list[str]]:
    """All 22 morphometrics for one building, in FEATURE_NAMES order."""
    p = building.footprint
    a, per, l_max, r_mean = size_metrics(p)
    sbro, lco, bisector, weighted = orientation_metrics(p)
    shape = shape_metrics(p)
    values = np.array(
        (a, per, l_max, r_mean, sbro, lco, bisector, weighted)
        + shape.as_tuple()
        + (density_metric(building, cell),)
    )
    if not np.isfinite(values).all():
        raise DegenerateGeometryError(
            f"non-finite morphometrics for building {building.id!r}"
        )
    return values, shape.flags


@dataclass
class FeatureTable:
    """Feature matrix over a building corpus, rows aligned with ids."""

    ids: list[str]
    block_ids: list[str]
    matrix: np.ndarray  # (n, 22)
    flags: dict[str, list[str]] = field(default_factory=dict)

    def rows_for(self, ids: list[str]) -> np.ndarray:
        index = {bid: i for i, bid in enumerate(self.ids)}
        return self.matrix[[index[i] for i in ids]]


def compute_feature_table(buildings, cells_by_building) -> FeatureTable:
    ids, block_ids, rows = [], [], []
    flags: dict[str, list[str]] = {}
    for b in sorted(buildings, key=lambda x: x.id):
        vec, fl = feature_vector(b, cells_by_building[b.id])
        ids.append(b.id)
        block_ids.append(b.block_id)
        rows.append(vec)
        if fl:
            flags[b.id] = fl
    return FeatureTable(
        ids=ids, block_ids=block_ids, matrix=np.array(rows), flags=flags
    )


def write_features_csv(path, table: FeatureTable) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "block_id", *FEATURE_NAMES])
        for i, bid in enumerate(table.ids):
            writer.writerow(
                [bid, table.block_ids[i]] + [repr(float(v)) for v in table.matrix[i]]
            )


def read_features_csv(path) -> FeatureTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[2:] != list(FEATURE_NAMES):
            raise DataError("unexpected feature CSV header")
        ids, block_ids, rows = [], [], []
        for row in reader:
            ids.append(row[0])
            block_ids.append(row[1])
            rows.append([float(v) for v in row[2:]])
    return FeatureTable(ids=ids, block_ids=block_ids, matrix=np.array(rows))


class FeatureStandardizer(BaseEstimator, TransformerMixin):
    """Per-column z-scoring with population statistics.

    Zero-variance columns transform to 0 and are reported in
    ``zero_variance_columns_``.
    """

    def __init__(self, eps: float = 1e-12):
        self.eps = eps

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.zero_variance_columns_ = np.flatnonzero(std <= self.eps)
        self.std_ = np.where(std <= self.eps, 1.0, std)
        return self

    def transform(self, X):
        if not hasattr(self, "mean_"):
            raise NotFittedError("FeatureStandardizer is not fitted")
        X = np.asarray(X, dtype=float)
        out = (X - self.mean_) / self.std_
        if len(self.zero_variance_columns_):
            out[:, self.zero_variance_columns_] = 0.0
        return out
