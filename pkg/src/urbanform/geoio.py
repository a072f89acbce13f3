"""GeoJSON ingestion: buildings, blocks, neighborhoods.

Inputs must be FeatureCollections in a projected planar CRS (meters).
Geometry repair is limited to ring closure and orientation
normalization; self-intersecting rings are rejected per feature.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import shapely.geometry as sgeom

from .errors import DataError, DegenerateGeometryError, ParseError
from .geometry import Polygon

FUNCTION_LABELS = (
    "commercial",
    "residential",
    "institutional",
    "industrial",
    "mixed_use",
    "public_open_space",
)

MIN_GRAPH_BUILDINGS = 4


@dataclass
class Building:
    id: str
    footprint: Polygon
    block_id: str | None = None


@dataclass
class Block:
    id: str
    boundary: Polygon
    function: str
    building_ids: list[str] = field(default_factory=list)

    @property
    def eligible(self) -> bool:
        return len(self.building_ids) >= MIN_GRAPH_BUILDINGS


@dataclass
class Neighborhood:
    id: str
    name: str
    boundary: Polygon


@dataclass
class Diagnostic:
    source: str
    feature_index: int
    feature_id: str | None
    reason: str


@dataclass
class Dataset:
    buildings: list[Building]
    blocks: list[Block]
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def eligible_blocks(self) -> list[Block]:
        return [b for b in self.blocks if b.eligible]

    def buildings_by_block(self) -> dict[str, list[Building]]:
        by_id = {b.id: b for b in self.buildings}
        return {
            blk.id: [by_id[i] for i in blk.building_ids] for blk in self.blocks
        }


def _load_feature_collection(path_or_file, source: str):
    try:
        if hasattr(path_or_file, "read"):
            doc = json.load(path_or_file)
        else:
            with open(path_or_file) as fh:
                doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{source}: cannot parse file: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ParseError(f"{source}: expected a GeoJSON FeatureCollection")
    features = doc.get("features")
    if not isinstance(features, list):
        raise ParseError(f"{source}: FeatureCollection has no feature list")
    return features


def _close_ring(ring, diagnostics, source, idx, fid):
    arr = np.asarray(ring, dtype=float)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise ParseError("ring is not a coordinate sequence", idx)
    arr = arr[:, :2]
    if np.abs(arr[0] - arr[-1]).max() >= 1e-9:
        diagnostics.append(
            Diagnostic(source, idx, fid, "unclosed ring auto-closed")
        )
    return arr


def _parse_polygon(geom, diagnostics, source, idx, fid) -> Polygon:
    if not isinstance(geom, dict) or geom.get("type") != "Polygon":
        raise ParseError(
            f"unsupported geometry type {geom.get('type') if isinstance(geom, dict) else geom!r}",
            idx,
        )
    rings = geom.get("coordinates") or []
    if not rings:
        raise ParseError("polygon has no rings", idx)
    exterior = _close_ring(rings[0], diagnostics, source, idx, fid)
    holes = [_close_ring(r, diagnostics, source, idx, fid) for r in rings[1:]]
    try:
        poly = Polygon(exterior, holes)
    except DegenerateGeometryError as exc:
        raise ParseError(str(exc), idx) from exc
    shp = poly.to_shapely()
    if not shp.is_valid:
        raise ParseError("self-intersecting or otherwise invalid polygon", idx)
    return poly


def _check_projected(polys, source: str):
    """Refuse lon/lat input: every vertex inside [-180, 180] x [-90, 90]."""
    if not polys:
        return
    for poly in polys:
        for ring in poly.all_rings:
            if (np.abs(ring[:, 0]) > 180).any() or (np.abs(ring[:, 1]) > 90).any():
                return
    raise DataError(
        f"{source}: coordinates look geographic (lon/lat); "
        "inputs must be in a projected CRS in meters"
    )


def parse_dataset(buildings_file, blocks_file) -> Dataset:
    """Parse building and block FeatureCollections and assemble a dataset.

    Buildings are assigned to the block containing their centroid (ties on
    shared boundaries go to the lexicographically smallest block id).
    Features that cannot be repaired are rejected with a diagnostic.
    """
    diagnostics: list[Diagnostic] = []

    buildings: list[Building] = []
    for idx, feat in enumerate(_load_feature_collection(buildings_file, "buildings")):
        props = feat.get("properties") or {}
        fid = str(props.get("id", feat.get("id", idx)))
        try:
            poly = _parse_polygon(feat.get("geometry"), diagnostics, "buildings", idx, fid)
        except ParseError as exc:
            diagnostics.append(Diagnostic("buildings", idx, fid, str(exc)))
            continue
        buildings.append(Building(id=fid, footprint=poly))
    seen: set[str] = set()
    for b in buildings:
        if b.id in seen:
            raise DataError(f"duplicate building id {b.id!r}")
        seen.add(b.id)

    blocks: list[Block] = []
    for idx, feat in enumerate(_load_feature_collection(blocks_file, "blocks")):
        props = feat.get("properties") or {}
        fid = str(props.get("id", feat.get("id", idx)))
        function = props.get("function")
        if function not in FUNCTION_LABELS:
            diagnostics.append(
                Diagnostic(
                    "blocks",
                    idx,
                    fid,
                    f"unknown function label {function!r}; allowed: "
                    + ", ".join(FUNCTION_LABELS),
                )
            )
            continue
        try:
            poly = _parse_polygon(feat.get("geometry"), diagnostics, "blocks", idx, fid)
        except ParseError as exc:
            diagnostics.append(Diagnostic("blocks", idx, fid, str(exc)))
            continue
        blocks.append(Block(id=fid, boundary=poly, function=function))
    seen = set()
    for blk in blocks:
        if blk.id in seen:
            raise DataError(f"duplicate block id {blk.id!r}")
        seen.add(blk.id)

    _check_projected([b.footprint for b in buildings], "buildings")
    _check_projected([b.boundary for b in blocks], "blocks")

    block_shapes = [(blk, blk.boundary.to_shapely()) for blk in blocks]
    assigned: list[Building] = []
    for bidx, b in enumerate(buildings):
        c = sgeom.Point(b.footprint.centroid)
        hosts = sorted(
            (blk.id for blk, shp in block_shapes if shp.covers(c))
        )
        if not hosts:
            diagnostics.append(
                Diagnostic("buildings", bidx, b.id, "centroid inside no block")
            )
            continue
        b.block_id = hosts[0]
        assigned.append(b)
    by_block: dict[str, list[str]] = {blk.id: [] for blk in blocks}
    for b in assigned:
        by_block[b.block_id].append(b.id)
    for blk in blocks:
        blk.building_ids = sorted(by_block[blk.id])
        if not blk.eligible:
            diagnostics.append(
                Diagnostic(
                    "blocks",
                    -1,
                    blk.id,
                    f"only {len(blk.building_ids)} buildings; "
                    f"ineligible for the graph stage (needs {MIN_GRAPH_BUILDINGS})",
                )
            )
    return Dataset(buildings=assigned, blocks=blocks, diagnostics=diagnostics)


def parse_neighborhoods(path_or_file) -> list[Neighborhood]:
    diagnostics: list[Diagnostic] = []
    out: list[Neighborhood] = []
    for idx, feat in enumerate(_load_feature_collection(path_or_file, "neighborhoods")):
        props = feat.get("properties") or {}
        fid = str(props.get("id", feat.get("id", idx)))
        name = str(props.get("name", fid))
        poly = _parse_polygon(feat.get("geometry"), diagnostics, "neighborhoods", idx, fid)
        out.append(Neighborhood(id=fid, name=name, boundary=poly))
    return out


def _ring_coords(ring: np.ndarray) -> list[list[float]]:
    closed = np.vstack([ring, ring[:1]])
    return [[float(x), float(y)] for x, y in closed]


def polygon_to_geojson(p: Polygon) -> dict:
    return {
        "type": "Polygon",
        "coordinates": [_ring_coords(p.exterior)] + [_ring_coords(h) for h in p.holes],
    }


def shapely_to_geojson(geom) -> dict:
    return sgeom.mapping(geom)


def write_feature_collection(path, features: list[dict]) -> None:
    doc = {"type": "FeatureCollection", "features": features}
    with open(path, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")
