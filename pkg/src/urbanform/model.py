"""Hierarchical-pooling graph convolutional classifier of block function.

The forward pass interleaves graph convolutions with top-k node pooling
driven by a vertex information score (the L1 deviation of each node's
features from its neighborhood average), then reads the final graph out
through concatenated mean/max pooling and a three-layer MLP.
"""

from __future__ import annotations

import copy
import hashlib
import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from . import autodiff as ad
from .graphs import MorphGraph, affinity_matrix
from .metrics import FeatureStandardizer, N_FEATURES


@dataclass
class ModelConfig:
    conv_layers: int = 3
    pool_layers: int = 3
    linear_layers: int = 3
    hidden_dim: int = 64
    pool_rate: float = 0.30
    batch_size: int = 64
    learning_rate: float = 0.001
    max_epochs: int = 1000
    patience: int = 70
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    classes: int = 6
    seed: int = 0
    optimizer: str = "adam"  # "sgd" as a fallback

    def __post_init__(self):
        if not (0.0 < self.pool_rate <= 1.0):
            raise ValueError("pool_rate must be in (0, 1]")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        if self.conv_layers != self.pool_layers:
            raise ValueError("conv and pool layers alternate; counts must match")
        if self.linear_layers < 2:
            raise ValueError("need at least two linear layers")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")


def derive_seed(seed: int, *labels) -> int:
    """Stable per-task seed fan-out from a global seed."""
    digest = hashlib.sha256(
        (":".join([str(seed), *map(str, labels)])).encode()
    ).digest()
    return int.from_bytes(digest[:8], "big")


def init_parameters(cfg: ModelConfig, n_features: int, n_classes: int, seed: int):
    """Glorot-uniform weights, zero biases, in a fixed-name dict."""
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        return ad.Tensor(rng.uniform(-limit, limit, (fan_in, fan_out)), requires_grad=True)

    params: dict[str, ad.Tensor] = {}
    dim_in = n_features
    for layer in range(cfg.conv_layers):
        params[f"conv{layer}_w"] = glorot(dim_in, cfg.hidden_dim)
        dim_in = cfg.hidden_dim
    dims = [2 * cfg.hidden_dim] + [cfg.hidden_dim] * (cfg.linear_layers - 1) + [n_classes]
    for layer in range(cfg.linear_layers):
        params[f"lin{layer}_w"] = glorot(dims[layer], dims[layer + 1])
        params[f"lin{layer}_b"] = ad.Tensor(np.zeros(dims[layer + 1]), requires_grad=True)
    return params


def pooling_scores(aff: np.ndarray, feats: np.ndarray) -> np.ndarray:
    """Vertex information score: row-wise L1 norm of (I - D^-1 E) F.

    E is the affinity-weighted adjacency without self-loops. Isolated
    nodes score the L1 norm of their own features.
    """
    deg = aff.sum(axis=1)
    safe = np.where(deg > 0, deg, 1.0)
    neighborhood = (aff / safe[:, None]) @ feats
    return np.abs(feats - neighborhood).sum(axis=1)


def top_k_indices(scores: np.ndarray, rate: float) -> np.ndarray:
    """Indices of the ceil(rate*n) highest scores (at least one); ties keep
    the lowest node index. Returned sorted ascending."""
    n = len(scores)
    k = max(1, math.ceil(rate * n))
    order = np.lexsort((np.arange(n), -scores))
    return np.sort(order[:k])


def _normalized_adjacency(aff_t: ad.Tensor) -> ad.Tensor:
    """Symmetric normalization with self-loops: D^-1/2 (A + I) D^-1/2."""
    n = aff_t.shape[0]
    a_tilde = ad.add(aff_t, np.eye(n))
    deg = ad.tsum(a_tilde, axis=1)
    d_inv_sqrt = ad.power(deg, -0.5)
    col = ad.reshape(d_inv_sqrt, (n, 1))
    row = ad.reshape(d_inv_sqrt, (1, n))
    return ad.mul(ad.mul(col, a_tilde), row)


def gcn_layer(feats_t: ad.Tensor, aff_t: ad.Tensor, weight: ad.Tensor) -> ad.Tensor:
    """H' = ReLU(norm_adj @ H @ W)."""
    return ad.relu(ad.matmul(ad.matmul(_normalized_adjacency(aff_t), feats_t), weight))


def readout(feats_t: ad.Tensor, params: dict, cfg: ModelConfig) -> ad.Tensor:
    """Concatenated column mean/max, then the linear stack; returns
    log-probabilities of shape (1, n_classes)."""
    pooled = ad.concat([ad.tmean(feats_t, axis=0), ad.tmax(feats_t, axis=0)], axis=0)
    h = ad.reshape(pooled, (1, pooled.shape[0]))
    for layer in range(cfg.linear_layers):
        h = ad.add(ad.matmul(h, params[f"lin{layer}_w"]), params[f"lin{layer}_b"])
        if layer < cfg.linear_layers - 1:
            h = ad.relu(h)
    return ad.log_softmax(h, axis=1)


def forward_log_probs(
    params: dict,
    feats,
    aff,
    cfg: ModelConfig,
) -> tuple[ad.Tensor, list[np.ndarray]]:
    """Full model forward on one graph.

    ``feats`` (n, F) and ``aff`` (n, n) may be arrays or tensors (the
    explainer passes masked tensors). Returns log-probabilities and the
    kept-node index lists of each pooling layer (relative to the layer's
    input ordering).
    """
    feats_t = feats if isinstance(feats, ad.Tensor) else ad.Tensor(feats)
    aff_t = aff if isinstance(aff, ad.Tensor) else ad.Tensor(aff)
    kept: list[np.ndarray] = []
    for layer in range(cfg.conv_layers):
        feats_t = gcn_layer(feats_t, aff_t, params[f"conv{layer}_w"])
        scores = pooling_scores(aff_t.value, feats_t.value)
        keep = top_k_indices(scores, cfg.pool_rate)
        kept.append(keep)
        feats_t = ad.gather_rows(feats_t, keep)
        aff_t = ad.gather_submatrix(aff_t, keep)
    return readout(feats_t, params, cfg), kept


def nll_loss(log_probs: ad.Tensor, class_index: int) -> ad.Tensor:
    onehot = np.zeros(log_probs.shape)
    onehot[0, class_index] = 1.0
    return ad.neg(ad.tsum(ad.mul(log_probs, onehot)))


class GraphFunctionClassifier(BaseEstimator, ClassifierMixin):
    """Graph-level classifier over morphological graphs.

    Standardization of node features is fitted on the training graphs
    only and stored with the model. Early stopping monitors validation
    accuracy when a validation set is supplied; the best-validation
    checkpoint is restored after training.
    """

    def __init__(self, config: ModelConfig | None = None):
        self.config = config

    @property
    def cfg(self) -> ModelConfig:
        return self.config if self.config is not None else ModelConfig()

    # -- internal helpers -------------------------------------------------

    def _graph_arrays(self, graph: MorphGraph):
        return self.scaler_.transform(graph.features), affinity_matrix(graph)

    def _log_probs(self, graph: MorphGraph) -> np.ndarray:
        feats, aff = self._graph_arrays(graph)
        lp, _ = forward_log_probs(self.params_, feats, aff, self.cfg)
        return lp.value[0]

    def _accuracy(self, graphs, y) -> float:
        if not graphs:
            return 0.0
        pred = self.predict(graphs)
        return float(np.mean([p == t for p, t in zip(pred, y)]))

    # -- estimator API -----------------------------------------------------

    def fit(self, graphs: list[MorphGraph], y=None, val_graphs=None, val_y=None):
        cfg = self.cfg
        if y is None:
            y = [g.label for g in graphs]
        if val_graphs and val_y is None:
            val_y = [g.label for g in val_graphs]
        self.classes_ = sorted(set(y))
        if val_y:
            unknown = set(val_y) - set(self.classes_)
            if unknown:
                warnings.warn(
                    f"validation labels {sorted(unknown)} absent from the training split"
                )
        class_index = {c: i for i, c in enumerate(self.classes_)}

        self.scaler_ = FeatureStandardizer().fit(
            np.vstack([g.features for g in graphs])
        )
        self.params_ = init_parameters(
            cfg, N_FEATURES, len(self.classes_), derive_seed(cfg.seed, "init")
        )
        param_list = [self.params_[k] for k in sorted(self.params_)]
        if cfg.optimizer == "adam":
            opt_state = ad.AdamState.for_params(param_list, cfg.learning_rate)

        arrays = [self._graph_arrays(g) for g in graphs]
        targets = [class_index[label] for label in y]

        best_val = -1.0
        best_params = None
        epochs_since_improvement = 0
        history = {"train_loss": [], "val_accuracy": [], "best_epoch": None}

        for epoch in range(cfg.max_epochs):
            order = np.random.default_rng(
                derive_seed(cfg.seed, "epoch", epoch)
            ).permutation(len(graphs))
            epoch_loss = 0.0
            for start in range(0, len(order), cfg.batch_size):
                batch = order[start : start + cfg.batch_size]
                ad.zero_grads(param_list)
                total = None
                for gi in batch:
                    feats, aff = arrays[gi]
                    lp, _ = forward_log_probs(self.params_, feats, aff, cfg)
                    loss = nll_loss(lp, targets[gi])
                    total = loss if total is None else ad.add(total, loss)
                batch_loss = ad.mul(total, 1.0 / len(batch))
                ad.backward(batch_loss)
                if cfg.optimizer == "adam":
                    ad.adam_step(param_list, opt_state)
                else:
                    ad.sgd_step(param_list, cfg.learning_rate)
                epoch_loss += float(batch_loss.value) * len(batch)
            history["train_loss"].append(epoch_loss / len(graphs))

            if val_graphs:
                val_acc = self._accuracy(val_graphs, val_y)
                history["val_accuracy"].append(val_acc)
                if val_acc > best_val:
                    best_val = val_acc
                    best_params = {k: p.value.copy() for k, p in self.params_.items()}
                    history["best_epoch"] = epoch
                    epochs_since_improvement = 0
                else:
                    epochs_since_improvement += 1
                    if epochs_since_improvement >= cfg.patience:
                        break

        if best_params is not None:
            for k, p in self.params_.items():
                p.value = best_params[k]
        history["stopped_epoch"] = len(history["train_loss"]) - 1
        self.history_ = history
        return self

    def predict_log_proba(self, graphs: list[MorphGraph]) -> np.ndarray:
        if not hasattr(self, "params_"):
            raise NotFittedError("classifier is not fitted")
        return np.array([self._log_probs(g) for g in graphs])

    def predict_proba(self, graphs: list[MorphGraph]) -> np.ndarray:
        return np.exp(self.predict_log_proba(graphs))

    def predict(self, graphs: list[MorphGraph]) -> list[str]:
        lp = self.predict_log_proba(graphs)
        return [self.classes_[i] for i in lp.argmax(axis=1)]

    def score(self, graphs: list[MorphGraph], y=None) -> float:
        if y is None:
            y = [g.label for g in graphs]
        return self._accuracy(graphs, y)

    # -- persistence --------------------------------------------------------

    def named_tensors(self) -> dict[str, np.ndarray]:
        out = {name: p.value for name, p in self.params_.items()}
        out["scaler_mean"] = self.scaler_.mean_
        out["scaler_std"] = self.scaler_.std_
        out["scaler_zero_variance"] = np.asarray(
            self.scaler_.zero_variance_columns_, dtype=float
        )
        return out

    def save(self, checkpoint_path, sidecar_path) -> None:
        import json

        ad.save_tensors(checkpoint_path, self.named_tensors())
        cfg = asdict(self.cfg)
        cfg["split"] = list(cfg["split"])
        with open(sidecar_path, "w") as fh:
            json.dump({"config": cfg, "classes": self.classes_}, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, checkpoint_path, sidecar_path) -> "GraphFunctionClassifier":
        import json

        with open(sidecar_path) as fh:
            doc = json.load(fh)
        cfg_doc = dict(doc["config"])
        cfg_doc["split"] = tuple(cfg_doc["split"])
        clf = cls(config=ModelConfig(**cfg_doc))
        tensors = ad.load_tensors(checkpoint_path)
        clf.classes_ = list(doc["classes"])
        scaler = FeatureStandardizer()
        scaler.mean_ = tensors.pop("scaler_mean")
        scaler.std_ = tensors.pop("scaler_std")
        scaler.zero_variance_columns_ = tensors.pop("scaler_zero_variance").astype(int)
        clf.scaler_ = scaler
        clf.params_ = {
            name: ad.Tensor(arr, requires_grad=True) for name, arr in tensors.items()
        }
        return clf
