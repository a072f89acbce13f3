"""Building morphometrics, weighted block graphs, an explainable
hierarchical-pooling graph classifier of urban function, symbolic
configuration types, and land-use-efficiency regression."""

from .errors import (
    ConfigError,
    DataError,
    DegenerateGeometryError,
    ParseError,
    StageError,
    UrbanFormError,
)
from .geometry import Polygon
from .geoio import Block, Building, Dataset, parse_dataset, parse_neighborhoods
from .tessellation import TessellationCell, tessellate_block
from .metrics import (
    FEATURE_NAMES,
    FeatureStandardizer,
    FeatureTable,
    compute_feature_table,
    feature_vector,
)
from .graphs import MorphGraph, affinity, build_graph, delaunay_edges
from .model import GraphFunctionClassifier, ModelConfig
from .evaluation import (
    MetricsReport,
    cross_validate,
    evaluate,
    stratified_kfold,
    stratified_split,
    train_model,
)
from .explain import Explanation, explain_graph, extract_core_subgraph, select_key_features
from .symbolize import (
    ConfigurationType,
    KMeansTypes,
    PlanarProjection2D,
    classify_configuration,
    regional_representative,
)
from .regression import (
    EfficiencyRecord,
    PowerLawRegressor,
    RegressionFit,
    compare_groups,
    efficiency,
    fit_power,
)
from .synthetic import generate_synthetic
from .pipeline import PipelineConfig, RunManifest, parse_config, run_pipeline

__version__ = "0.1.0"
