"""Morphological tessellation: partition a block into per-building cells.

Each footprint boundary is densified at a fixed spacing, a Voronoi
diagram of the densified points is dissolved per building, clipped to
the block boundary, and the footprint itself is folded into its cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import shapely.geometry as sgeom
from scipy.spatial import Voronoi
from shapely.ops import unary_union

from .errors import DataError
from .geoio import Block, Building, write_feature_collection, shapely_to_geojson
from .geometry import densify_ring

DEFAULT_SPACING = 1.0


@dataclass
class TessellationCell:
    building_id: str
    cell: sgeom.base.BaseGeometry

    @property
    def area(self) -> float:
        return float(self.cell.area)


def _check_disjoint(buildings: list[Building]) -> None:
    shapes = [(b.id, b.footprint.to_shapely()) for b in buildings]
    offenders = []
    for i in range(len(shapes)):
        for j in range(i + 1, len(shapes)):
            a_id, a = shapes[i]
            b_id, b = shapes[j]
            if a.intersects(b) and a.intersection(b).area > 1e-9:
                offenders.append((a_id, b_id))
    if offenders:
        raise DataError(
            "overlapping footprints: "
            + "; ".join(f"{a}~{b}" for a, b in offenders)
        )


def _guard_points(points: np.ndarray) -> np.ndarray:
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    center = (lo + hi) / 2.0
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1.0)) * 5.0
    ring = []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            ring.append(center + span * np.array([dx, dy], float))
    return np.array(ring)


def _region_polygon(vor: Voronoi, point_idx: int) -> sgeom.Polygon:
    region = vor.regions[vor.point_region[point_idx]]
    if -1 in region or len(region) < 3:
        raise DataError("unbounded Voronoi region; tessellation failed")
    verts = vor.vertices[region]
    anchor = vor.points[point_idx]
    order = np.argsort(np.arctan2(verts[:, 1] - anchor[1], verts[:, 0] - anchor[0]))
    return sgeom.Polygon(verts[order])


def tessellate_block(
    block: Block,
    buildings: list[Building],
    spacing: float = DEFAULT_SPACING,
) -> list[TessellationCell]:
    """Nearest-building partition of the block into one cell per building."""
    if not buildings:
        return []
    _check_disjoint(buildings)
    boundary = block.boundary.to_shapely()
    footprints = {b.id: b.footprint.to_shapely() for b in buildings}
    order = sorted(footprints)

    if len(buildings) == 1:
        return [TessellationCell(building_id=order[0], cell=boundary)]

    samples = []
    owners = []
    for b in buildings:
        pts = densify_ring(b.footprint.exterior, spacing)
        samples.append(pts)
        owners.extend([b.id] * len(pts))
    pts = np.vstack(samples)
    all_pts = np.vstack([pts, _guard_points(np.vstack([pts, block.boundary.exterior]))])
    vor = Voronoi(all_pts)

    pieces: dict[str, list[sgeom.Polygon]] = {bid: [] for bid in order}
    for i, owner in enumerate(owners):
        pieces[owner].append(_region_polygon(vor, i))

    cells: list[TessellationCell] = []
    for bid in order:
        merged = unary_union(pieces[bid]).intersection(boundary)
        # trim neighbors' footprints, then fold in our own
        others = [footprints[o] for o in order if o != bid]
        if others:
            merged = merged.difference(unary_union(others))
        merged = merged.union(footprints[bid].intersection(boundary))
        cells.append(TessellationCell(building_id=bid, cell=merged))
    return cells


def write_tessellation_geojson(path, cells: list[TessellationCell]) -> None:
    features = [
        {
            "type": "Feature",
            "geometry": shapely_to_geojson(c.cell),
            "properties": {"building_id": c.building_id, "cell_area": c.area},
        }
        for c in cells
    ]
    write_feature_collection(path, features)
