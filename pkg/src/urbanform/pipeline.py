"""Pipeline orchestration: seven resumable stages from raw GeoJSON to the
regression report, with a digest manifest for reproducibility checks.

Stage outputs live under ``<out>/<stage>/``; each stage records a cache
key (config subset + input digests) so ``resume`` can skip work that is
already up to date. In deterministic mode the manifest omits timings, so
reruns with equal seeds are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import plots
from .errors import ConfigError, StageError, UrbanFormError
from .explain import (
    explain_graph,
    select_key_features,
    union_selected_features,
    write_explanations_jsonl,
    write_importance_csv,
)
from .geoio import (
    Block,
    Building,
    Dataset,
    parse_dataset,
    parse_neighborhoods,
    polygon_to_geojson,
)
from .geometry import Polygon
from .graphs import build_graph, read_graphs_jsonl, write_graphs_jsonl
from .metrics import (
    FEATURE_NAMES,
    FeatureStandardizer,
    compute_feature_table,
    read_features_csv,
    write_features_csv,
)
from .model import GraphFunctionClassifier, ModelConfig, derive_seed
from .evaluation import (
    cross_validate,
    train_model,
    write_fold_summary_csv,
)
from .regression import (
    GROUPS,
    compare_groups,
    efficiency,
    fit_power,
    write_efficiency_csv,
)
from .symbolize import (
    KMeansTypes,
    PlanarProjection2D,
    assign_blocks_to_neighborhoods,
    classify_configuration,
    regional_representative,
    write_building_types_csv,
    write_configurations_geojson,
    write_neighborhood_summary_csv,
)
from .tessellation import tessellate_block, write_tessellation_geojson

STAGES = (
    "ingest",
    "features",
    "graphs",
    "train_evaluate",
    "explain",
    "symbolize",
    "analyze",
)

SOFTWARE_VERSION = "urbanform 0.1.0"


@dataclass
class PipelineConfig:
    buildings: str = ""
    blocks: str = ""
    neighborhoods: str | None = None
    city_center: tuple[float, float] | None = None
    out: str = "runs/out"
    seed: int = 0
    deterministic: bool = False
    resume: bool = False
    kfold: int = 10
    feature_threshold: float = 0.950
    edge_threshold: float = 0.900
    threshold_mode: str = "normalized"
    dominance_general: float = 0.50
    dominance_residential: float = 0.60
    explainer_steps: int = 100
    explainer_learning_rate: float = 0.01
    tessellation_spacing: float = 1.0
    model: ModelConfig = field(default_factory=ModelConfig)

    def validate(self, through: str) -> None:
        for threshold in (
            self.feature_threshold,
            self.edge_threshold,
            self.dominance_general,
            self.dominance_residential,
        ):
            if not (0.0 < threshold <= 1.0):
                raise ConfigError(f"threshold {threshold} outside (0, 1]")
        if self.threshold_mode not in ("normalized", "raw"):
            raise ConfigError(f"unknown threshold_mode {self.threshold_mode!r}")
        for path, name in ((self.buildings, "buildings"), (self.blocks, "blocks")):
            if not path:
                raise ConfigError(f"missing required input path {name!r}")
            if not os.path.exists(path):
                raise ConfigError(f"{name} file not found: {path}")
        if self.neighborhoods and not os.path.exists(self.neighborhoods):
            raise ConfigError(f"neighborhoods file not found: {self.neighborhoods}")
        if _stage_index(through) >= _stage_index("analyze") and self.city_center is None:
            raise ConfigError("city_center_x/city_center_y are required for the analyze stage")


_MODEL_KEYS = {
    "conv_layers": int,
    "pool_layers": int,
    "linear_layers": int,
    "hidden_dim": int,
    "pool_rate": float,
    "batch_size": int,
    "learning_rate": float,
    "max_epochs": int,
    "patience": int,
    "classes": int,
    "optimizer": str,
}

_TOP_KEYS = {
    "buildings": str,
    "blocks": str,
    "neighborhoods": str,
    "out": str,
    "seed": int,
    "deterministic": lambda v: v.lower() in ("1", "true", "yes"),
    "resume": lambda v: v.lower() in ("1", "true", "yes"),
    "kfold": int,
    "feature_threshold": float,
    "edge_threshold": float,
    "threshold_mode": str,
    "dominance_general": float,
    "dominance_residential": float,
    "explainer_steps": int,
    "explainer_learning_rate": float,
    "tessellation_spacing": float,
}


def parse_config(path) -> PipelineConfig:
    """Flat ``key = value`` text file; '#' starts a comment."""
    values: dict[str, str] = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, _, value = line.partition("=")
                values[key.strip()] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_mapping(values, base_dir=os.path.dirname(os.path.abspath(path)))


def config_from_mapping(values: dict[str, str], base_dir: str | None = None) -> PipelineConfig:
    cfg = PipelineConfig()
    model_kwargs: dict = {}
    center_x = center_y = None
    split = list(cfg.model.split)
    for key, value in values.items():
        try:
            if key in _TOP_KEYS:
                setattr(cfg, key, _TOP_KEYS[key](value))
            elif key in _MODEL_KEYS:
                model_kwargs[key] = _MODEL_KEYS[key](value)
            elif key == "city_center_x":
                center_x = float(value)
            elif key == "city_center_y":
                center_y = float(value)
            elif key == "split_train":
                split[0] = float(value)
            elif key == "split_val":
                split[1] = float(value)
            elif key == "split_test":
                split[2] = float(value)
            elif key == "model_seed":
                model_kwargs["seed"] = int(value)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
    if (center_x is None) != (center_y is None):
        raise ConfigError("city_center_x and city_center_y must be given together")
    if center_x is not None:
        cfg.city_center = (center_x, center_y)
    model_kwargs["split"] = tuple(split)
    model_kwargs.setdefault("seed", cfg.seed)
    try:
        cfg.model = ModelConfig(**model_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if base_dir:
        for attr in ("buildings", "blocks", "neighborhoods", "out"):
            value = getattr(cfg, attr)
            if value and not os.path.isabs(value):
                setattr(cfg, attr, os.path.join(base_dir, value))
    return cfg


# ---------------------------------------------------------------------------
# manifest plumbing


def _stage_index(name: str) -> int:
    return STAGES.index(name)


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class StageRecord:
    name: str
    status: str  # complete | cached | skipped
    outputs: dict[str, str] = field(default_factory=dict)
    notes: dict = field(default_factory=dict)
    seconds: float | None = None


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    deterministic: bool
    software: str = SOFTWARE_VERSION
    stages: list[StageRecord] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        doc = {
            "software": self.software,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "deterministic": self.deterministic,
            "stages": [],
        }
        for s in self.stages:
            rec = {
                "name": s.name,
                "status": s.status,
                "outputs": dict(sorted(s.outputs.items())),
                "notes": s.notes,
            }
            if not self.deterministic and s.seconds is not None:
                rec["seconds"] = round(s.seconds, 3)
            doc["stages"].append(rec)
        return doc


class PipelineRunner:
    """Executes stages in order under ``cfg.out``, caching by content."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = cfg.out

    # -- paths ---------------------------------------------------------------

    def stage_dir(self, stage: str) -> str:
        path = os.path.join(self.out, stage)
        os.makedirs(path, exist_ok=True)
        return path

    def path(self, stage: str, name: str) -> str:
        return os.path.join(self.stage_dir(stage), name)

    # -- config hashing --------------------------------------------------------

    def _config_fingerprint(self) -> dict:
        cfg = self.cfg
        doc = asdict(cfg)
        doc.pop("out")
        doc.pop("resume")
        doc["buildings"] = _sha256_file(cfg.buildings)
        doc["blocks"] = _sha256_file(cfg.blocks)
        doc["neighborhoods"] = (
            _sha256_file(cfg.neighborhoods) if cfg.neighborhoods else None
        )
        return doc

    def config_hash(self) -> str:
        return _sha256_text(json.dumps(self._config_fingerprint(), sort_keys=True))

    def _stage_key(self, stage: str, input_paths: list[str]) -> str:
        payload = {
            "stage": stage,
            "config": self._config_fingerprint(),
            "inputs": [_sha256_file(p) for p in input_paths],
        }
        return _sha256_text(json.dumps(payload, sort_keys=True))

    # -- running ----------------------------------------------------------------

    def run(self, through: str = "analyze") -> RunManifest:
        if through not in STAGES:
            raise ConfigError(f"unknown stage {through!r}")
        self.cfg.validate(through)
        os.makedirs(self.out, exist_ok=True)
        manifest = RunManifest(
            config_hash=self.config_hash(),
            seed=self.cfg.seed,
            deterministic=self.cfg.deterministic,
        )
        for stage in STAGES[: _stage_index(through) + 1]:
            manifest.stages.append(self._run_stage(stage))
        with open(os.path.join(self.out, "manifest.json"), "w") as fh:
            json.dump(manifest.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return manifest

    def _run_stage(self, stage: str) -> StageRecord:
        runner = getattr(self, f"_stage_{stage}")
        input_paths = self._stage_inputs(stage)
        key = self._stage_key(stage, input_paths)
        status_path = self.path(stage, ".stage.json")
        if self.cfg.resume and os.path.exists(status_path):
            with open(status_path) as fh:
                status = json.load(fh)
            if status.get("key") == key and all(
                os.path.exists(os.path.join(self.out, rel)) for rel in status["outputs"]
            ):
                return StageRecord(
                    name=stage,
                    status="cached",
                    outputs={
                        rel: _sha256_file(os.path.join(self.out, rel))
                        for rel in status["outputs"]
                    },
                    notes=status.get("notes", {}),
                )
        started = time.perf_counter()
        try:
            outputs, notes = runner()
        except UrbanFormError:
            raise
        except Exception as exc:  # noqa: BLE001 - surfaced with the stage name
            raise StageError(stage, repr(exc)) from exc
        record = StageRecord(
            name=stage,
            status=notes.pop("__status__", "complete"),
            outputs={rel: _sha256_file(os.path.join(self.out, rel)) for rel in outputs},
            notes=notes,
            seconds=time.perf_counter() - started,
        )
        with open(status_path, "w") as fh:
            json.dump(
                {"key": key, "outputs": list(record.outputs), "notes": record.notes},
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")
        return record

    def _stage_inputs(self, stage: str) -> list[str]:
        cfg = self.cfg
        table = {
            "ingest": [cfg.buildings, cfg.blocks],
            "features": [self.path("ingest", "dataset.json")],
            "graphs": [
                self.path("ingest", "dataset.json"),
                self.path("features", "features.csv"),
            ],
            "train_evaluate": [self.path("graphs", "graphs.jsonl")],
            "explain": [
                self.path("graphs", "graphs.jsonl"),
                self.path("train_evaluate", "checkpoint.json"),
            ],
            "symbolize": [
                self.path("features", "features.csv"),
                self.path("explain", "explanations.jsonl"),
                self.path("explain", "selected_features.json"),
            ],
            "analyze": [
                self.path("ingest", "dataset.json"),
                self.path("explain", "explanations.jsonl"),
                self.path("symbolize", "configurations.geojson"),
            ],
        }
        return [p for p in table[stage] if os.path.exists(p)]

    # -- dataset (de)serialization ------------------------------------------------

    def _write_dataset(self, path, dataset: Dataset) -> None:
        def poly_doc(p: Polygon) -> dict:
            return polygon_to_geojson(p)["coordinates"]

        doc = {
            "buildings": [
                {
                    "id": b.id,
                    "block_id": b.block_id,
                    "rings": poly_doc(b.footprint),
                }
                for b in dataset.buildings
            ],
            "blocks": [
                {
                    "id": blk.id,
                    "function": blk.function,
                    "building_ids": blk.building_ids,
                    "rings": poly_doc(blk.boundary),
                }
                for blk in dataset.blocks
            ],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, separators=(",", ":"))
            fh.write("\n")

    def _load_dataset(self) -> Dataset:
        with open(self.path("ingest", "dataset.json")) as fh:
            doc = json.load(fh)
        buildings = [
            Building(
                id=b["id"],
                footprint=Polygon(b["rings"][0], b["rings"][1:]),
                block_id=b["block_id"],
            )
            for b in doc["buildings"]
        ]
        blocks = [
            Block(
                id=blk["id"],
                boundary=Polygon(blk["rings"][0], blk["rings"][1:]),
                function=blk["function"],
                building_ids=blk["building_ids"],
            )
            for blk in doc["blocks"]
        ]
        return Dataset(buildings=buildings, blocks=blocks)

    # -- stages ----------------------------------------------------------------

    def _stage_ingest(self):
        dataset = parse_dataset(self.cfg.buildings, self.cfg.blocks)
        self._write_dataset(self.path("ingest", "dataset.json"), dataset)
        with open(self.path("ingest", "diagnostics.json"), "w") as fh:
            json.dump(
                [
                    {
                        "source": d.source,
                        "feature_index": d.feature_index,
                        "feature_id": d.feature_id,
                        "reason": d.reason,
                    }
                    for d in dataset.diagnostics
                ],
                fh,
                indent=2,
            )
            fh.write("\n")
        notes = {
            "buildings": len(dataset.buildings),
            "blocks": len(dataset.blocks),
            "eligible_blocks": len(dataset.eligible_blocks()),
            "diagnostics": len(dataset.diagnostics),
        }
        return ["ingest/dataset.json", "ingest/diagnostics.json"], notes

    def _stage_features(self):
        dataset = self._load_dataset()
        by_block = dataset.buildings_by_block()
        cells = []
        cells_by_building = {}
        for block in sorted(dataset.blocks, key=lambda b: b.id):
            block_cells = tessellate_block(
                block, by_block[block.id], self.cfg.tessellation_spacing
            )
            cells.extend(block_cells)
            for cell in block_cells:
                cells_by_building[cell.building_id] = cell
        table = compute_feature_table(dataset.buildings, cells_by_building)
        write_features_csv(self.path("features", "features.csv"), table)
        write_tessellation_geojson(self.path("features", "tessellation.geojson"), cells)
        with open(self.path("features", "flags.json"), "w") as fh:
            json.dump(table.flags, fh, indent=2, sort_keys=True)
            fh.write("\n")
        notes = {"buildings": len(table.ids), "flagged": len(table.flags)}
        return [
            "features/features.csv",
            "features/tessellation.geojson",
            "features/flags.json",
        ], notes

    def _stage_graphs(self):
        dataset = self._load_dataset()
        table = read_features_csv(self.path("features", "features.csv"))
        by_block = dataset.buildings_by_block()
        graphs = [
            build_graph(block, by_block[block.id], table)
            for block in sorted(dataset.eligible_blocks(), key=lambda b: b.id)
        ]
        write_graphs_jsonl(self.path("graphs", "graphs.jsonl"), graphs)
        notes = {
            "graphs": len(graphs),
            "degenerate_layouts": sum(g.degenerate_layout for g in graphs),
        }
        return ["graphs/graphs.jsonl"], notes

    def _stage_train_evaluate(self):
        graphs = read_graphs_jsonl(self.path("graphs", "graphs.jsonl"))
        model_cfg = self.cfg.model
        cv = cross_validate(graphs, model_cfg, k=self.cfg.kfold)
        with open(self.path("train_evaluate", "metrics_report.json"), "w") as fh:
            json.dump(cv.aggregate.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        write_fold_summary_csv(self.path("train_evaluate", "folds.csv"), cv)

        clf, history = train_model(graphs, model_cfg)
        clf.save(
            self.path("train_evaluate", "checkpoint.json"),
            self.path("train_evaluate", "model_config.json"),
        )
        with open(self.path("train_evaluate", "history.json"), "w") as fh:
            json.dump(history, fh, indent=2, sort_keys=True)
            fh.write("\n")
        predictions = {
            g.block_id: {"label": g.label, "predicted": p, "correct": p == g.label}
            for g, p in zip(graphs, clf.predict(graphs))
        }
        with open(self.path("train_evaluate", "predictions.json"), "w") as fh:
            json.dump(predictions, fh, indent=2, sort_keys=True)
            fh.write("\n")
        notes = {
            "kfold": self.cfg.kfold,
            "aggregate_weighted_f1": cv.aggregate.weighted_f1,
            "aggregate_overall_accuracy": cv.aggregate.overall_accuracy,
            "final_correct": sum(1 for p in predictions.values() if p["correct"]),
        }
        return [
            "train_evaluate/metrics_report.json",
            "train_evaluate/folds.csv",
            "train_evaluate/checkpoint.json",
            "train_evaluate/model_config.json",
            "train_evaluate/history.json",
            "train_evaluate/predictions.json",
        ], notes

    def _stage_explain(self):
        graphs = read_graphs_jsonl(self.path("graphs", "graphs.jsonl"))
        clf = GraphFunctionClassifier.load(
            self.path("train_evaluate", "checkpoint.json"),
            self.path("train_evaluate", "model_config.json"),
        )
        predictions = clf.predict(graphs)
        explanations = []
        flagged = 0
        by_class: dict[str, list] = {}
        for graph, predicted in zip(graphs, predictions):
            if predicted != graph.label:
                continue
            expl = explain_graph(
                clf,
                graph,
                seed=derive_seed(self.cfg.seed, "explain", graph.block_id),
                steps=self.cfg.explainer_steps,
                learning_rate=self.cfg.explainer_learning_rate,
            )
            explanations.append(expl)
            if expl.converged:
                by_class.setdefault(graph.label, []).append(expl)
            else:
                flagged += 1
        write_explanations_jsonl(self.path("explain", "explanations.jsonl"), explanations)
        importances = select_key_features(
            by_class, self.cfg.feature_threshold, self.cfg.threshold_mode
        )
        outputs = ["explain/explanations.jsonl", "explain/selected_features.json"]
        for label, imp in sorted(importances.items()):
            write_importance_csv(self.path("explain", f"importance_{label}.csv"), imp)
            plots.bar_chart(
                self.path("explain", f"importance_{label}.svg"),
                list(FEATURE_NAMES),
                imp.averages,
                f"average feature importance: {label}",
            )
            outputs.extend(
                [f"explain/importance_{label}.csv", f"explain/importance_{label}.svg"]
            )
        selected_doc = {
            "mode": self.cfg.threshold_mode,
            "feature_threshold": self.cfg.feature_threshold,
            "edge_threshold": self.cfg.edge_threshold,
            "per_class": {
                label: {
                    "indices": imp.selected,
                    "names": [FEATURE_NAMES[i] for i in imp.selected],
                    "n_explanations": imp.n_explanations,
                }
                for label, imp in sorted(importances.items())
            },
            "union_indices": union_selected_features(importances),
        }
        with open(self.path("explain", "selected_features.json"), "w") as fh:
            json.dump(selected_doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        notes = {
            "explained": len(explanations),
            "flagged_unconverged": flagged,
            "classes_explained": sorted(by_class),
        }
        return outputs, notes

    def _load_explanations(self) -> list[dict]:
        records = []
        with open(self.path("explain", "explanations.jsonl")) as fh:
            for line in fh:
                records.append(json.loads(line))
        return records

    def _stage_symbolize(self):
        records = [r for r in self._load_explanations() if r["converged"]]
        with open(self.path("explain", "selected_features.json")) as fh:
            selected = json.load(fh)
        feature_indices = selected["union_indices"]
        if len(feature_indices) < 2:
            feature_indices = list(range(len(FEATURE_NAMES)))
        table = read_features_csv(self.path("features", "features.csv"))
        dataset = self._load_dataset()
        blocks_by_id = {b.id: b for b in dataset.blocks}

        core_ids = []
        core_block = []
        for rec in records:
            for bid in rec["core_building_ids"]:
                core_ids.append(bid)
                core_block.append(rec["block_id"])
        X = table.rows_for(core_ids)[:, feature_indices]
        X = FeatureStandardizer().fit_transform(X)
        projection = PlanarProjection2D().fit(X)
        embedding = projection.transform(X)
        clusterer = KMeansTypes(seed=derive_seed(self.cfg.seed, "kmeans")).fit(embedding)
        types = clusterer.labels_ + 1  # 1-based type ids

        write_building_types_csv(
            self.path("symbolize", "building_types.csv"), core_ids, clusterer.labels_
        )
        plots.scatter(
            self.path("symbolize", "embedding.svg"),
            embedding,
            clusterer.labels_,
            "core buildings in the reduced plane (colored by type)",
        )

        types_by_block: dict[str, list[int]] = {}
        for bid, block_id, t in zip(core_ids, core_block, types):
            types_by_block.setdefault(block_id, []).append(int(t))
        configurations = [
            classify_configuration(
                block_id,
                types_by_block[block_id],
                blocks_by_id[block_id].function,
                self.cfg.dominance_general,
                self.cfg.dominance_residential,
            )
            for block_id in sorted(types_by_block)
        ]
        write_configurations_geojson(
            self.path("symbolize", "configurations.geojson"), blocks_by_id, configurations
        )
        outputs = [
            "symbolize/building_types.csv",
            "symbolize/embedding.svg",
            "symbolize/configurations.geojson",
            "symbolize/summary.json",
        ]
        notes: dict = {
            "core_buildings": len(core_ids),
            "configured_blocks": len(configurations),
            "explained_variance": float(projection.explained_variance_ratio_.sum()),
        }
        if self.cfg.neighborhoods:
            neighborhoods = parse_neighborhoods(self.cfg.neighborhoods)
            assignment = assign_blocks_to_neighborhoods(
                [blocks_by_id[c.block_id] for c in configurations], neighborhoods
            )
            summaries = regional_representative(neighborhoods, configurations, assignment)
            write_neighborhood_summary_csv(
                self.path("symbolize", "neighborhood_summary.csv"), summaries
            )
            outputs.append("symbolize/neighborhood_summary.csv")
            notes["step3"] = "complete"
            notes["neighborhoods"] = len(summaries)
        else:
            notes["step3"] = "skipped (no neighborhoods file)"
        summary_doc = {
            "kind_histogram": _histogram(c.display for c in configurations),
            "selected_feature_indices": feature_indices,
            "step3": notes["step3"],
        }
        with open(self.path("symbolize", "summary.json"), "w") as fh:
            json.dump(summary_doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return outputs, notes

    def _stage_analyze(self):
        dataset = self._load_dataset()
        by_block = dataset.buildings_by_block()
        blocks_by_id = {b.id: b for b in dataset.blocks}
        center = self.cfg.city_center

        records = self._load_explanations()
        core_by_block = {
            r["block_id"]: r["core_building_ids"] for r in records if r["converged"]
        }
        with open(self.path("symbolize", "configurations.geojson")) as fh:
            conf_doc = json.load(fh)
        kind_by_block = {
            f["properties"]["block_id"]: f["properties"]["kind"]
            for f in conf_doc["features"]
        }

        residential = [
            b for b in dataset.blocks if b.function == "residential" and b.building_ids
        ]
        efficiency_records = []
        skipped: list[dict] = []
        for block in residential:
            efficiency_records.append(
                efficiency(block, by_block[block.id], "raw", center)
            )
            core_ids = core_by_block.get(block.id)
            if core_ids:
                core_buildings = [b for b in by_block[block.id] if b.id in set(core_ids)]
                efficiency_records.append(
                    efficiency(block, core_buildings, "core", center)
                )
            else:
                skipped.append({"block_id": block.id, "group": "core", "reason": "no explanation"})

        representative_ids: set[str] = set()
        if self.cfg.neighborhoods and os.path.exists(
            self.path("symbolize", "neighborhood_summary.csv")
        ):
            import csv as _csv

            with open(self.path("symbolize", "neighborhood_summary.csv")) as fh:
                rep_by_neigh = {
                    row["neighborhood_id"]: row["representative"]
                    for row in _csv.DictReader(fh)
                }
            neighborhoods = parse_neighborhoods(self.cfg.neighborhoods)
            assignment = assign_blocks_to_neighborhoods(
                [blocks_by_id[bid] for bid in kind_by_block], neighborhoods
            )
            for block in residential:
                kind = kind_by_block.get(block.id)
                neigh = assignment.get(block.id)
                if kind is None or neigh is None:
                    continue
                if rep_by_neigh.get(neigh) == kind:
                    core_buildings = [
                        b
                        for b in by_block[block.id]
                        if b.id in set(core_by_block.get(block.id, []))
                    ]
                    if core_buildings:
                        efficiency_records.append(
                            efficiency(block, core_buildings, "representative", center)
                        )

        write_efficiency_csv(self.path("analyze", "efficiency.csv"), efficiency_records)

        fits: dict[str, dict] = {}
        for group in GROUPS:
            rows = [r for r in efficiency_records if r.group == group]
            if len(rows) < 3:
                continue
            x = np.array([r.distance for r in rows])
            fits[group] = {
                "e_area": fit_power(x, np.array([r.e_area for r in rows])),
                "e_num": fit_power(x, np.array([r.e_num for r in rows])),
            }
        note = (
            "power-law fits on natural logs; log_a_base10 included; exponent "
            "signs reported exactly as computed from the data"
        )
        report = compare_groups(fits, note=note)
        report["skipped_blocks"] = skipped
        with open(self.path("analyze", "regression_report.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs = ["analyze/efficiency.csv", "analyze/regression_report.json"]
        for indicator in ("e_area", "e_num"):
            series = {}
            for group, fit_pair in fits.items():
                rows = [r for r in efficiency_records if r.group == group]
                x = np.array([r.distance for r in rows])
                y = np.array([getattr(r, indicator) for r in rows])
                fit = fit_pair[indicator]
                series[group] = (x, y, fit.log_a, fit.b)
            if series:
                name = f"analyze/regression_{indicator}.svg"
                plots.regression_plot(
                    os.path.join(self.out, name),
                    series,
                    f"distance to center vs {indicator} (log-log)",
                )
                outputs.append(name)
        notes = {
            "groups_fitted": sorted(fits),
            "records": len(efficiency_records),
            "missing_groups": report["missing_groups"],
        }
        return outputs, notes


def _histogram(items) -> dict[str, int]:
    out: dict[str, int] = {}
    for item in items:
        out[item] = out.get(item, 0) + 1
    return dict(sorted(out.items()))


def run_pipeline(cfg: PipelineConfig, through: str = "analyze") -> RunManifest:
    return PipelineRunner(cfg).run(through)
