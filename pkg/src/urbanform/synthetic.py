"""Synthetic desk-scale dataset with planted class structure.

Three block classes on a street grid: elongated rectangles (the planted
discriminative feature is the elongation index), compact near-squares,
and mixed blocks salted with small auxiliary buildings. Footprints are
placed on a per-block subgrid, so they never overlap, and every block
has at least four buildings.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

# layout constants (meters); the origin offset keeps coordinates well
# outside the lon/lat range so ingestion accepts them as projected
ORIGIN = (300_000.0, 4_500_000.0)
BLOCK_SIDE = 140.0
BLOCK_PITCH = 180.0
SUBGRID = 3
BUILDING_MARGIN = 3.0

CLASS_SHAPES = ("elongated", "compact", "mixed")
DEFAULT_CLASS_LABELS = ("commercial", "residential", "institutional")


@dataclass
class SynthPaths:
    buildings: str
    blocks: str
    neighborhoods: str
    metadata: str


def _rect(cx, cy, width, length, angle_deg):
    """Corner ring of a width x length rectangle centered at (cx, cy)."""
    t = math.radians(angle_deg)
    ux = np.array([math.cos(t), math.sin(t)]) * (length / 2.0)
    uy = np.array([-math.sin(t), math.cos(t)]) * (width / 2.0)
    c = np.array([cx, cy])
    return [list(c - ux - uy), list(c + ux - uy), list(c + ux + uy), list(c - ux + uy)]


def _rect_aabb(width, length, angle_deg):
    t = math.radians(angle_deg)
    w = abs(length * math.cos(t)) + abs(width * math.sin(t))
    h = abs(length * math.sin(t)) + abs(width * math.cos(t))
    return w, h


def _sample_building(shape: str, kind: str, rng) -> tuple[float, float]:
    """(width, length) for one footprint of the given block shape."""
    if shape == "elongated":
        width = rng.uniform(3.5, 5.0)
        return width, width * rng.uniform(4.0, 8.0)
    if shape == "compact":
        width = rng.uniform(8.0, 15.0)
        return width, width * rng.uniform(1.0, 1.3)
    if kind == "auxiliary":
        side = rng.uniform(2.0, 3.5)
        return side, side * rng.uniform(1.0, 1.15)
    width = rng.uniform(7.0, 10.0)
    return width, width * rng.uniform(2.0, 3.2)


def _place_in_cell(cell_origin, cell_side, width, length, angle, rng):
    interior = cell_side - 2.0 * BUILDING_MARGIN
    w, h = _rect_aabb(width, length, angle)
    scale = min(1.0, interior / w, interior / h)
    if scale < 0.3:
        raise DataError("building cannot be packed into its cell")
    width *= scale
    length *= scale
    w, h = _rect_aabb(width, length, angle)
    slack_x = (interior - w) / 2.0
    slack_y = (interior - h) / 2.0
    cx = cell_origin[0] + cell_side / 2.0 + rng.uniform(-slack_x, slack_x)
    cy = cell_origin[1] + cell_side / 2.0 + rng.uniform(-slack_y, slack_y)
    return _rect(cx, cy, width, length, angle)


def _feature(geometry_ring, properties):
    ring = [[float(x), float(y)] for x, y in geometry_ring]
    ring.append(ring[0])
    return {
        "type": "Feature",
        "geometry": {"type": "Polygon", "coordinates": [ring]},
        "properties": properties,
    }


def generate_synthetic(
    out_dir,
    blocks_per_class: int = 50,
    seed: int = 0,
    class_labels: tuple[str, ...] = DEFAULT_CLASS_LABELS,
) -> SynthPaths:
    """Write buildings/blocks/neighborhoods GeoJSON plus ground-truth
    metadata; byte-identical output for a fixed seed."""
    import os

    if not (2 <= len(class_labels) <= len(CLASS_SHAPES)):
        raise DataError("need between 2 and 3 classes")
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)

    n_blocks = blocks_per_class * len(class_labels)
    n_cols = int(math.ceil(math.sqrt(n_blocks * 1.5)))
    n_rows = int(math.ceil(n_blocks / n_cols))

    building_features = []
    block_features = []
    block_class: dict[str, str] = {}
    serial = 0
    for b in range(n_blocks):
        col, row = b % n_cols, b // n_cols
        label = class_labels[b % len(class_labels)]
        shape = CLASS_SHAPES[b % len(class_labels)]
        block_id = f"blk{b:04d}"
        x0 = ORIGIN[0] + col * BLOCK_PITCH
        y0 = ORIGIN[1] + row * BLOCK_PITCH
        block_features.append(
            _feature(
                [[x0, y0], [x0 + BLOCK_SIDE, y0], [x0 + BLOCK_SIDE, y0 + BLOCK_SIDE], [x0, y0 + BLOCK_SIDE]],
                {"id": block_id, "function": label},
            )
        )
        block_class[block_id] = label

        cell_side = BLOCK_SIDE / SUBGRID
        cells = [(i, j) for j in range(SUBGRID) for i in range(SUBGRID)]
        if shape == "mixed":
            n_medium = int(rng.integers(3, 5))
            n_aux = int(rng.integers(3, 6))
            kinds = ["medium"] * n_medium + ["auxiliary"] * n_aux
        else:
            kinds = ["medium"] * int(rng.integers(5, 10))
        picked = rng.choice(len(cells), size=len(kinds), replace=False)
        base_angle = float(rng.choice([0.0, 90.0]))
        for kind, cell_idx in zip(kinds, picked):
            i, j = cells[cell_idx]
            width, length = _sample_building(shape, kind, rng)
            angle = base_angle + rng.uniform(-8.0, 8.0)
            ring = _place_in_cell(
                (x0 + i * cell_side, y0 + j * cell_side), cell_side, width, length, angle, rng
            )
            building_features.append(
                _feature(ring, {"id": f"bld{serial:05d}", "block_id_hint": block_id})
            )
            serial += 1

    # three vertical neighborhood strips covering the whole layout
    strip_cols = max(1, n_cols // 3)
    neighborhood_features = []
    total_w = n_cols * BLOCK_PITCH
    total_h = n_rows * BLOCK_PITCH
    for s in range(3):
        x_lo = ORIGIN[0] + s * strip_cols * BLOCK_PITCH - BLOCK_PITCH / 4
        x_hi = (
            ORIGIN[0] + total_w + BLOCK_PITCH / 4
            if s == 2
            else ORIGIN[0] + (s + 1) * strip_cols * BLOCK_PITCH - BLOCK_PITCH / 4
        )
        y_lo = ORIGIN[1] - BLOCK_PITCH / 4
        y_hi = ORIGIN[1] + total_h + BLOCK_PITCH / 4
        neighborhood_features.append(
            _feature(
                [[x_lo, y_lo], [x_hi, y_lo], [x_hi, y_hi], [x_lo, y_hi]],
                {"id": f"nbh{s}", "name": f"strip-{s}"},
            )
        )

    paths = SynthPaths(
        buildings=os.path.join(out_dir, "buildings.geojson"),
        blocks=os.path.join(out_dir, "blocks.geojson"),
        neighborhoods=os.path.join(out_dir, "neighborhoods.geojson"),
        metadata=os.path.join(out_dir, "metadata.json"),
    )
    for path, features in (
        (paths.buildings, building_features),
        (paths.blocks, block_features),
        (paths.neighborhoods, neighborhood_features),
    ):
        with open(path, "w") as fh:
            json.dump({"type": "FeatureCollection", "features": features}, fh, separators=(",", ":"))
            fh.write("\n")
    metadata = {
        "seed": seed,
        "blocks_per_class": blocks_per_class,
        "class_labels": list(class_labels),
        "class_shapes": {
            label: CLASS_SHAPES[i] for i, label in enumerate(class_labels)
        },
        "block_class": block_class,
        "discriminative_feature": "elongation",
        "city_center": [ORIGIN[0] + total_w, ORIGIN[1] + total_h],
    }
    with open(paths.metadata, "w") as fh:
        json.dump(metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
