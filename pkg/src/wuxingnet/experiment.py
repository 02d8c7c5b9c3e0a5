"""Reproducible experiment harness: config, cases, train/eval/inspect runs.

A run is fully determined by (config file, seed): the metrics CSV it writes
is byte-identical across repeats. Wall-clock numbers would break that, so
timing columns default to 0.0 unless the config opts into real timings.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import core, topology
from .engine import SimConfig
from .mnist import Dataset, downsample, load_idx_pair, make_split
from .trainer import (Trainer, TrainingConfig, checkpoint_to_json,
                      trainer_from_checkpoint)

# case selector -> (strategy set, paired-K1 flag). The pid_* names use the
# letters I (integral, K1), D (differential, K2), P (proportional, K3);
# combos accept the letters in any order.
_FIXED_CASES = {
    "case1_K3_only": (frozenset({"proportional_K3"}), False),
    "case2_K1K3_same_rule": (frozenset({"proportional_K3"}), True),
}
_LETTER_STRATEGY = {
    "I": "integral_K1",
    "D": "differential_K2",
    "P": "proportional_K3",
}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def resolve_case(name: str):
    """Map a case selector to exactly one strategy configuration."""
    if name in _FIXED_CASES:
        return _FIXED_CASES[name]
    if name.startswith("pid_"):
        letters = name[len("pid_"):]
        if letters and len(set(letters)) == len(letters) \
                and all(ch in _LETTER_STRATEGY for ch in letters):
            return frozenset(_LETTER_STRATEGY[ch] for ch in letters), False
    raise ConfigError(
        f"unknown case {name!r}; expected case1_K3_only, "
        "case2_K1K3_same_rule, or pid_<letters> with letters from I, D, P")


def case_names():
    fixed = sorted(_FIXED_CASES)
    singles = ["pid_I", "pid_D", "pid_P"]
    combos = ["pid_IP", "pid_ID", "pid_PD", "pid_IPD"]
    return fixed + singles + combos


@dataclass(frozen=True)
class DatasetSpec:
    """Where samples come from: IDX files on disk or the synthetic toy set."""

    kind: str
    n_train: int
    n_test: int
    images: str = ""
    labels: str = ""
    downsample_factor: int = 1
    n_features: int = 6
    n_classes: int = 2

    def __post_init__(self):
        if self.kind not in ("idx", "toy"):
            raise ConfigError(f"dataset kind {self.kind!r} not one of idx, toy")
        if self.n_train < 0 or self.n_test < 0:
            raise ConfigError("split sizes must be nonnegative")
        if self.kind == "idx" and (not self.images or not self.labels):
            raise ConfigError("idx dataset needs images and labels paths")
        if self.kind == "toy":
            if self.n_classes < 2:
                raise ConfigError("toy dataset needs at least 2 classes")
            if self.n_features % self.n_classes:
                raise ConfigError("toy n_features must divide by n_classes")
        if self.downsample_factor < 1:
            raise ConfigError("downsample_factor must be >= 1")


@dataclass(frozen=True)
class ExperimentSpec:
    layer_sizes: tuple
    dataset: DatasetSpec
    case: str = "case1_K3_only"
    wiring: str = "paper"
    fan_in: tuple = (4,)
    seed: int = 0
    sim: SimConfig = field(default_factory=SimConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    input_scale: float = 1.0
    deterministic_timing: bool = True
    out_dir: str = "runs/out"

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ConfigError("need at least 2 layers")
        if self.input_scale <= 0 or not np.isfinite(self.input_scale):
            raise ConfigError("input_scale must be positive and finite")
        fans = self.fan_in if hasattr(self.fan_in, "__len__") else (self.fan_in,)
        try:
            fans = tuple(int(f) for f in fans)
        except (TypeError, ValueError):
            raise ConfigError("fan_in must be an integer or list of integers") \
                from None
        # a single value applies to every boundary
        if len(fans) == 1:
            fans = fans * (len(self.layer_sizes) - 1)
        if len(fans) != len(self.layer_sizes) - 1:
            raise ConfigError(
                f"fan_in needs 1 or {len(self.layer_sizes) - 1} values, "
                f"got {len(fans)}")
        if any(f < 1 for f in fans):
            raise ConfigError("fan_in entries must be >= 1")
        object.__setattr__(self, "fan_in", fans)
        strategies, paired = resolve_case(self.case)
        resolved = TrainingConfig(
            target1=self.training.target1,
            target2=self.training.target2,
            kt=self.training.kt,
            signal_gate_eps=self.training.signal_gate_eps,
            strategies=strategies,
            epochs=self.training.epochs,
            clamp_min=self.training.clamp_min,
            clamp_max=self.training.clamp_max,
            case2_paired_k1=paired,
            inputnode_first_layer_only=self.training.inputnode_first_layer_only,
        )
        object.__setattr__(self, "training", resolved)

    def to_dict(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "dataset": {
                "kind": self.dataset.kind,
                "n_train": self.dataset.n_train,
                "n_test": self.dataset.n_test,
                "images": self.dataset.images,
                "labels": self.dataset.labels,
                "downsample_factor": self.dataset.downsample_factor,
                "n_features": self.dataset.n_features,
                "n_classes": self.dataset.n_classes,
            },
            "case": self.case,
            "resolved_strategies": sorted(self.training.strategies),
            "wiring": self.wiring,
            "fan_in": list(self.fan_in),
            "seed": self.seed,
            "sim": {
                "horizon_T": self.sim.horizon_T,
                "step_h": self.sim.step_h,
                "input_hold": self.sim.input_hold,
            },
            "training": {
                "target1": self.training.target1,
                "target2": self.training.target2,
                "kt": self.training.kt,
                "signal_gate_eps": self.training.signal_gate_eps,
                "epochs": self.training.epochs,
                "clamp_min": self.training.clamp_min,
                "clamp_max": self.training.clamp_max,
                "case2_paired_k1": self.training.case2_paired_k1,
                "inputnode_first_layer_only":
                    self.training.inputnode_first_layer_only,
            },
            "input_scale": self.input_scale,
            "deterministic_timing": self.deterministic_timing,
            "out_dir": self.out_dir,
        }


def _take(d: dict, allowed, where: str) -> dict:
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"unknown {where} keys: {sorted(extra)}")
    return d


def spec_from_dict(doc: dict) -> ExperimentSpec:
    """Build a validated spec from a parsed config document."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")
    _take(doc, {"layer_sizes", "dataset", "case", "resolved_strategies",
                "wiring", "fan_in", "seed", "sim", "training", "input_scale",
                "deterministic_timing", "out_dir"}, "config")
    try:
        layer_sizes = tuple(int(v) for v in doc["layer_sizes"])
    except KeyError:
        raise ConfigError("config needs layer_sizes") from None
    except (TypeError, ValueError):
        raise ConfigError("layer_sizes must be a list of integers") from None

    ds_doc = doc.get("dataset")
    if not isinstance(ds_doc, dict):
        raise ConfigError("config needs a dataset object")
    ds_doc = _take(dict(ds_doc),
                   {"kind", "n_train", "n_test", "images", "labels",
                    "downsample_factor", "n_features", "n_classes"},
                   "dataset")
    sim_doc = _take(dict(doc.get("sim", {})),
                    {"horizon_T", "step_h", "input_hold"}, "sim")
    tr_doc = _take(dict(doc.get("training", {})),
                   {"target1", "target2", "kt", "signal_gate_eps", "epochs",
                    "clamp_min", "clamp_max", "case2_paired_k1",
                    "inputnode_first_layer_only"}, "training")
    try:
        dataset = DatasetSpec(**ds_doc)
        sim = SimConfig(**sim_doc)
        training = TrainingConfig(**tr_doc)
        fan_in = doc.get("fan_in", 4)
        return ExperimentSpec(
            layer_sizes=layer_sizes,
            dataset=dataset,
            case=str(doc.get("case", "case1_K3_only")),
            wiring=str(doc.get("wiring", "paper")),
            fan_in=fan_in if hasattr(fan_in, "__len__") else (fan_in,),
            seed=int(doc.get("seed", 0)),
            sim=sim,
            training=training,
            input_scale=float(doc.get("input_scale", 1.0)),
            deterministic_timing=bool(doc.get("deterministic_timing", True)),
            out_dir=str(doc.get("out_dir", "runs/out")),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_spec(path) -> ExperimentSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return spec_from_dict(doc)


def default_config(template: str = "toy") -> dict:
    """A complete, commented-by-keys starting config for gen-config."""
    if template == "desk":
        spec = ExperimentSpec(
            layer_sizes=(196, 64, 32, 10),
            dataset=DatasetSpec(
                kind="idx", n_train=1000, n_test=500,
                images="data/mnist/subset-images-idx3-ubyte",
                labels="data/mnist/subset-labels-idx1-ubyte",
                downsample_factor=2),
            wiring="contrast",
            fan_in=(12, 4, 3),
            input_scale=2.0,
            sim=SimConfig(horizon_T=3.0, step_h=0.1),
            training=TrainingConfig(target1=0.07, target2=0.0, epochs=10,
                                    clamp_min=0.1, clamp_max=1.5),
            out_dir="runs/desk")
    elif template == "toy":
        spec = ExperimentSpec(
            layer_sizes=(6, 5, 2),
            dataset=DatasetSpec(kind="toy", n_train=80, n_test=40,
                                n_features=6, n_classes=2),
            sim=SimConfig(horizon_T=2.0, step_h=0.05),
            training=TrainingConfig(epochs=5, clamp_min=0.1, clamp_max=10.0),
            out_dir="runs/toy")
    else:
        raise ConfigError(f"unknown template {template!r}")
    doc = spec.to_dict()
    doc.pop("resolved_strategies")
    return doc


def make_toy_dataset(n: int, n_features: int, n_classes: int,
                     rng) -> Dataset:
    """Block-pattern synthetic classes: class c lights feature block c."""
    block = n_features // n_classes
    X = np.zeros((n, n_features))
    y = np.zeros(n, dtype=np.int64)
    for i in range(n):
        c = int(rng.integers(n_classes))
        y[i] = c
        base = np.zeros(n_features)
        base[c * block:(c + 1) * block] = 1.0
        X[i] = base * rng.uniform(0.6, 1.0) + rng.uniform(0.0, 0.08,
                                                          n_features)
    return Dataset(X, y)


def load_datasets(spec: ExperimentSpec):
    """Materialize (train, test) Datasets per the dataset spec."""
    ds = spec.dataset
    if ds.kind == "toy":
        rng = np.random.default_rng(spec.seed)
        return (make_toy_dataset(ds.n_train, ds.n_features, ds.n_classes, rng),
                make_toy_dataset(ds.n_test, ds.n_features, ds.n_classes, rng))
    try:
        images, labels = load_idx_pair(ds.images, ds.labels)
    except OSError as exc:
        raise ConfigError(f"cannot read dataset: {exc}") from None
    if ds.downsample_factor > 1:
        images = downsample(images, ds.downsample_factor)
    return make_split(images, labels, ds.n_train, ds.n_test, spec.seed)


def _check_shapes(spec: ExperimentSpec, train: Dataset, test: Dataset):
    n_feat = (train.features.shape[1] if len(train) else
              test.features.shape[1])
    if n_feat != spec.layer_sizes[0]:
        raise ConfigError(
            f"first layer has {spec.layer_sizes[0]} neurons but samples "
            f"carry {n_feat} features")
    all_labels = np.concatenate([train.labels, test.labels])
    if all_labels.size and all_labels.max() >= spec.layer_sizes[-1]:
        raise ConfigError(
            f"label {int(all_labels.max())} out of range for "
            f"{spec.layer_sizes[-1]} output classes")


METRICS_COLUMNS = ("epoch", "train_acc", "test_acc", "mean_abs_error",
                   "updated_neurons", "clamp_events", "wall_time")


@dataclass
class TrainResult:
    out_dir: Path
    metrics_path: Path
    checkpoint_path: Path
    rows: list
    diverged: bool
    trainer: Trainer


def _row(epoch, train_acc, test_acc, mae, updated, clamps, wall):
    return (epoch, repr(float(train_acc)), repr(float(test_acc)),
            repr(float(mae)), updated, clamps, repr(float(wall)))


def run_train(spec: ExperimentSpec) -> TrainResult:
    """Train per config; write metrics.csv, config echo, checkpoint.

    The metrics file always opens with an epoch-0 row holding the untrained
    evaluation, then one row per completed epoch. Divergence stops training
    after the partial epoch's row; the rows written so far are kept.
    """
    train, test = load_datasets(spec)
    _check_shapes(spec, train, test)
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    graph = topology.build_network(spec.layer_sizes, wiring=spec.wiring,
                                   seed=spec.seed, fan_in=spec.fan_in)
    trainer = Trainer(graph, spec.training, spec.sim)
    shuffle_rng = np.random.default_rng(spec.seed)

    x_train = train.features * spec.input_scale
    x_test = test.features * spec.input_scale

    echo_path = out_dir / "config-echo.json"
    echo_path.write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True)
                         + "\n")

    metrics_path = out_dir / "metrics.csv"
    rows = []
    diverged = False
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)

        t0 = time.perf_counter()
        train_acc, train_mae, _ = trainer.evaluate(x_train, train.labels)
        test_acc = trainer.evaluate(x_test, test.labels)[0] if len(test) \
            else 0.0
        wall = 0.0 if spec.deterministic_timing else time.perf_counter() - t0
        rows.append(_row(0, train_acc, test_acc, train_mae, 0, 0, wall))
        writer.writerow(rows[-1])
        fh.flush()

        for epoch in range(1, spec.training.epochs + 1):
            order = shuffle_rng.permutation(len(train))
            t0 = time.perf_counter()
            metrics = trainer.train_epoch(x_train[order], train.labels[order])
            train_acc, _, _ = trainer.evaluate(x_train, train.labels)
            test_acc = trainer.evaluate(x_test, test.labels)[0] if len(test) \
                else 0.0
            wall = 0.0 if spec.deterministic_timing \
                else time.perf_counter() - t0
            rows.append(_row(epoch, train_acc, test_acc,
                             metrics.mean_abs_error, metrics.updated_neurons,
                             metrics.clamp_events, wall))
            writer.writerow(rows[-1])
            fh.flush()
            if metrics.aborted:
                diverged = True
                break

    checkpoint_path = out_dir / "checkpoint.json"
    checkpoint_path.write_text(checkpoint_to_json(
        trainer, rng_state=shuffle_rng.bit_generator.state))
    return TrainResult(out_dir, metrics_path, checkpoint_path, rows,
                       diverged, trainer)


@dataclass(frozen=True)
class EvalReport:
    n_samples: int
    accuracy: float
    mean_abs_error: float
    confusion: np.ndarray  # [true, predicted] counts

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "accuracy": self.accuracy,
            "mean_abs_error": self.mean_abs_error,
            "confusion": self.confusion.tolist(),
        }


def run_eval(checkpoint_text: str, spec: ExperimentSpec,
             split: str = "test") -> EvalReport:
    """Evaluate a checkpoint on one split. Never mutates parameters."""
    trainer, _ = trainer_from_checkpoint(checkpoint_text)
    train, test = load_datasets(spec)
    ds = test if split == "test" else train
    if len(ds) == 0:
        raise ConfigError(f"{split} split is empty")
    n_classes = trainer.graph.layer_sizes[-1]
    n_feat = trainer.graph.layer_sizes[0]
    if ds.features.shape[1] != n_feat:
        raise ConfigError(
            f"checkpoint expects {n_feat} features, split has "
            f"{ds.features.shape[1]}")
    if ds.labels.max() >= n_classes:
        raise ConfigError(
            f"label {int(ds.labels.max())} out of range for checkpoint with "
            f"{n_classes} classes")
    acc, mae, preds = trainer.evaluate(ds.features * spec.input_scale,
                                       ds.labels)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (ds.labels, preds), 1)
    return EvalReport(len(ds), acc, mae, confusion)


@dataclass(frozen=True)
class FixedPointRow:
    neuron: int
    analytic: np.ndarray
    numeric: np.ndarray
    residual: float
    converged: bool


def inspect_fixed_point(k1, k2, k3, direction: str = "forward"):
    """Per-neuron fixed-point report: analytic seed, numeric root, residual."""
    k1 = np.atleast_2d(np.asarray(k1, dtype=float))
    k2 = np.atleast_2d(np.asarray(k2, dtype=float))
    k3 = np.atleast_2d(np.asarray(k3, dtype=float))
    states, converged = core.solve_fixed_points(k1, k2, k3,
                                                direction=direction)
    rhs = core.forward_rhs if direction == "forward" else core.inverse_rhs
    residuals = np.max(np.abs(rhs(states, k1, k2, k3)), axis=1)
    rows = []
    for i in range(k1.shape[0]):
        rows.append(FixedPointRow(
            neuron=i,
            analytic=core.fixed_point_seed(k1[i], k2[i], k3[i]),
            numeric=states[i],
            residual=float(residuals[i]),
            converged=bool(converged[i]),
        ))
    return rows


def inspect_checkpoint_fixed_points(checkpoint_text: str):
    """Fixed-point reports for every neuron of a checkpoint, both directions."""
    trainer, _ = trainer_from_checkpoint(checkpoint_text)
    return {
        "forward": inspect_fixed_point(trainer.k1, trainer.k2, trainer.k3,
                                       "forward"),
        "inverse": inspect_fixed_point(trainer.k1, trainer.k2, trainer.k3,
                                       "inverse"),
    }
