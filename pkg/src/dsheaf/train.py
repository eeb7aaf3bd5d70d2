"""Optimization loop, metrics, and multi-seed experiment orchestration."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import datasets as dio
from .graph import (
    Dataset,
    degree_features,
    dsbm_communities,
    dsbm_generate,
    make_splits,
    uniform_dsbm_params,
)
from .nn import (
    ModelConfig,
    ModelParams,
    SheafDiffusionModel,
    named_params,
    params_copy,
    params_from_named,
    softmax_cross_entropy,
)
from .rng import stream_rng, stream_seed
from .sheaf import MapClass


@dataclass
class OptimState:
    """Adam moment accumulators, shaped exactly like the parameters."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0


def init_optim_state(params: ModelParams) -> OptimState:
    named = named_params(params)
    return OptimState(m={k: np.zeros_like(a) for k, a in named.items()},
                      v={k: np.zeros_like(a) for k, a in named.items()})


def adam_step(params: ModelParams, grads: dict[str, np.ndarray], state: OptimState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> tuple[ModelParams, OptimState]:
    """One bias-corrected Adam update; returns fresh parameters, mutated state."""
    state.step += 1
    t = state.step
    new = {}
    for name, arr in named_params(params).items():
        g = np.asarray(grads[name])
        if g.shape != arr.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {arr.shape} for {name}")
        state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * (g * g)
        m_hat = state.m[name] / (1.0 - beta1 ** t)
        v_hat = state.v[name] / (1.0 - beta2 ** t)
        new[name] = arr - lr * m_hat / (np.sqrt(v_hat) + eps)
    return params_from_named(new), state


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: float
    test_acc: float
    val_loss: float


@dataclass
class TrainHistory:
    """Per-epoch metrics plus which epoch's parameters were kept."""

    records: list[EpochRecord]
    best_epoch: int
    stop_reason: str

    CSV_HEADER = "epoch,train_loss,train_acc,val_acc,test_acc"

    def to_csv_text(self) -> str:
        lines = [self.CSV_HEADER]
        for r in self.records:
            lines.append(f"{r.epoch},{r.train_loss!r},{r.train_acc!r},{r.val_acc!r},{r.test_acc!r}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv_text(), encoding="utf-8")

    @property
    def best_record(self) -> EpochRecord:
        return self.records[self.best_epoch - 1]


def accuracy(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    """Fraction of masked nodes whose argmax logit matches the label.

    Argmax ties resolve to the lowest class index.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("accuracy mask selects no nodes")
    preds = np.argmax(np.asarray(logits), axis=1)
    return float(np.mean(preds[mask] == np.asarray(labels)[mask]))


def evaluate(model: SheafDiffusionModel, params: ModelParams, dataset: Dataset,
             mask: np.ndarray) -> float:
    return accuracy(model.logits(params, dataset.features), dataset.labels, mask)


def train(config: ModelConfig, dataset: Dataset, seed: int, lr: float = 1e-2,
          max_epochs: int = 1000, patience: int = 200
          ) -> tuple[ModelParams, TrainHistory]:
    """Full-graph training with Adam and validation-accuracy early stopping.

    Per epoch: training-mode forward, masked loss on train nodes, backward,
    Adam step, then evaluation-mode metrics on all masks.  The returned
    parameters are the ones from the best validation epoch (ties broken by
    lower validation loss, then by the earlier epoch).
    """
    if patience < 1:
        raise ValueError("patience must be >= 1")
    if max_epochs < 1:
        raise ValueError("max_epochs must be >= 1")
    model = SheafDiffusionModel(config, dataset.graph)
    params = model.init_params(stream_rng(seed, "init"))
    state = init_optim_state(params)
    records: list[EpochRecord] = []
    best_epoch = 0
    best_key: tuple[float, float] | None = None
    best_params = params_copy(params)
    stop_reason = "max_epochs"
    for epoch in range(1, max_epochs + 1):
        loss, grads, _ = model.loss_and_grads(
            params, dataset.features, dataset.labels, dataset.train_mask,
            training=True, dropout_rng=stream_rng(seed, f"dropout.{epoch}"))
        params, state = adam_step(params, grads, state, lr)
        logits = model.logits(params, dataset.features)
        val_loss, _ = softmax_cross_entropy(logits, dataset.labels, dataset.val_mask)
        record = EpochRecord(
            epoch=epoch, train_loss=loss,
            train_acc=accuracy(logits, dataset.labels, dataset.train_mask),
            val_acc=accuracy(logits, dataset.labels, dataset.val_mask),
            test_acc=accuracy(logits, dataset.labels, dataset.test_mask),
            val_loss=val_loss)
        records.append(record)
        key = (record.val_acc, -record.val_loss)
        if best_key is None or key > best_key:
            best_key = key
            best_epoch = epoch
            best_params = params_copy(params)
        elif epoch - best_epoch >= patience:
            stop_reason = "early_stop"
            break
    return best_params, TrainHistory(records, best_epoch, stop_reason)


@dataclass
class ExperimentConfig:
    """Data generation, model, and optimization settings for one experiment."""

    # data source: "dsbm" or "files"
    source: str = "dsbm"
    n: int = 300
    communities: int = 5
    alpha_intra: float = 0.1
    alpha_inter: float = 0.08
    beta: float = 0.2
    edge_list: str = ""
    features: str = ""
    labels: str = ""
    use_degree_features: bool = False
    standardize_features: bool = True
    # splits
    train_frac: float = 0.8
    val_frac: float = 0.05
    test_frac: float = 0.15
    per_class: bool = True
    # model
    num_layers: int = 2
    d: int = 2
    q: float = 0.25
    hidden_channels: int = 16
    map_class: str = "diagonal"
    sheaf_act: str = "tanh"
    dropout: float = 0.0
    recompute_maps: str = "per_layer"
    phi_hidden: int = 16
    identity_start_maps: bool = True
    # optimization
    lr: float = 1e-2
    max_epochs: int = 1000
    patience: int = 200
    seed: int = 0
    num_seeds: int = 5

    def __post_init__(self):
        if self.source not in ("dsbm", "files"):
            raise ValueError("source must be 'dsbm' or 'files'")
        MapClass(self.map_class)

    def model_config(self, input_dim: int, num_classes: int) -> ModelConfig:
        return ModelConfig(input_dim=input_dim, num_classes=num_classes,
                           num_layers=self.num_layers, d=self.d, q=self.q,
                           hidden_channels=self.hidden_channels,
                           map_class=MapClass(self.map_class), sheaf_act=self.sheaf_act,
                           dropout=self.dropout, recompute_maps=self.recompute_maps,
                           phi_hidden=self.phi_hidden,
                           identity_start_maps=self.identity_start_maps)


def standardize(features: np.ndarray) -> np.ndarray:
    """Column z-scores with a variance floor for constant columns."""
    features = np.asarray(features, dtype=np.float64)
    mean = features.mean(axis=0, keepdims=True)
    std = features.std(axis=0, keepdims=True)
    return (features - mean) / np.maximum(std, 1e-12)


def build_dataset(config: ExperimentConfig, seed: int) -> Dataset:
    """Materialize graph, features, labels, and splits for one seed."""
    if config.source == "dsbm":
        params = uniform_dsbm_params(config.n, config.communities, config.alpha_intra,
                                     config.alpha_inter, config.beta,
                                     seed=stream_seed(seed, "graph"))
        graph = dsbm_generate(params)
        labels = dsbm_communities(config.n, config.communities)
        features = degree_features(graph)
    else:
        graph = dio.load_edge_list(config.edge_list)
        labels = dio.load_labels(config.labels, expected_rows=graph.n)
        if config.use_degree_features:
            features = degree_features(graph)
        else:
            features = dio.load_features(config.features, expected_rows=graph.n)
    if config.standardize_features:
        features = standardize(features)
    train_mask, val_mask, test_mask = make_splits(
        labels, (config.train_frac, config.val_frac, config.test_frac),
        per_class=config.per_class, seed=stream_seed(seed, "split"))
    return Dataset(graph, features, labels, train_mask, val_mask, test_mask)


@dataclass
class SeedResult:
    seed: int
    test_acc: float
    best_epoch: int
    stop_reason: str


@dataclass
class ExperimentSummary:
    mean_test_acc: float
    std_test_acc: float
    per_seed: list[SeedResult]
    histories: list[TrainHistory] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)


def run_experiment(config: ExperimentConfig, num_seeds: int | None = None,
                   seeds: list[int] | None = None) -> ExperimentSummary:
    """Train once per seed (fresh data, splits, and init) and aggregate.

    Test accuracy is read from the best-validation epoch; the summary std is
    the population standard deviation over seeds.
    """
    if seeds is None:
        count = config.num_seeds if num_seeds is None else num_seeds
        if count < 1:
            raise ValueError("at least one seed is required")
        seeds = [config.seed + i for i in range(count)]
    results = []
    histories = []
    for seed in seeds:
        dataset = build_dataset(config, seed)
        model_config = config.model_config(dataset.input_dim, dataset.num_classes)
        _, history = train(model_config, dataset, seed, lr=config.lr,
                           max_epochs=config.max_epochs, patience=config.patience)
        results.append(SeedResult(seed, history.best_record.test_acc,
                                  history.best_epoch, history.stop_reason))
        histories.append(history)
    accs = np.array([r.test_acc for r in results])
    return ExperimentSummary(mean_test_acc=float(accs.mean()),
                             std_test_acc=float(accs.std()),
                             per_seed=results, histories=histories,
                             seeds=list(seeds))
