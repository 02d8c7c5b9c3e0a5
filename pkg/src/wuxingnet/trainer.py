"""Correlation-driven parameter training.

After each sample the forward and backward signal integrals are correlated
per neuron and squashed through a bounded arctangent, and the result drives
multiplicative parameter updates:

    proportional (K3): g1_i = fwd_i * bwd_i,     k3_i *= exp(-g2_i)
    integral     (K1): g1   = sum(fwd)*sum(bwd), k1_i *= exp(+g2)
    differential (K2): g1_i = fwd_i * bwd_i * inputnode, k2_i *= exp(-g2_i)

Only neurons that carried signal in both directions update (the gate), and
every update must re-solve the neuron's settled states; a neuron whose new
parameters admit no settled state reverts to its previous ones for that
step.  Updates are applied per sample, between passes, never during one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import core, topology
from .core import NeuronParams
from .engine import SimConfig, Simulator, classify
from .topology import NetworkGraph

STRATEGIES = ("integral_K1", "differential_K2", "proportional_K3")

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainingConfig:
    """Targets, squash scale, gating threshold, strategy set, clamps."""

    target1: float = 1.0
    target2: float = 0.0
    kt: float = 1.0
    signal_gate_eps: float = 1e-9
    strategies: frozenset = frozenset({"proportional_K3"})
    epochs: int = 5
    clamp_min: float = 1e-3
    clamp_max: float = 1e3
    case2_paired_k1: bool = False
    inputnode_first_layer_only: bool = False

    def __post_init__(self):
        if not self.target1 > self.target2:
            raise ValueError("target1 must exceed target2")
        if not self.kt > 0:
            raise ValueError("kt must be positive")
        if self.signal_gate_eps < 0:
            raise ValueError("signal_gate_eps must be nonnegative")
        if not (0 < self.clamp_min < self.clamp_max):
            raise ValueError("need 0 < clamp_min < clamp_max")
        bad = set(self.strategies) - set(STRATEGIES)
        if bad:
            raise ValueError(f"unknown strategies: {sorted(bad)}")
        object.__setattr__(self, "strategies", frozenset(self.strategies))


@dataclass
class EpochMetrics:
    """Per-epoch training record."""

    n_samples: int = 0
    accuracy: float = 0.0
    mean_abs_error: float = 0.0
    updated_neurons: int = 0
    clamp_events: int = 0
    reverted_neurons: int = 0
    aborted: bool = False
    diverged_neuron: int | None = None


def output_error(leb, label: int, cfg: TrainingConfig) -> np.ndarray:
    """Target-gap errors: pull the label port up, push loud others down.

    Label class: target1 - Leb if below target1, else 0.  Every other
    class: target2 - Leb if above target2 (a nonpositive value), else 0.
    """
    leb = np.asarray(leb, dtype=float)
    if not 0 <= label < leb.shape[-1]:
        raise ValueError(f"label {label} out of range for {leb.shape[-1]} classes")
    err = np.where(leb > cfg.target2, cfg.target2 - leb, 0.0)
    if leb[label] < cfg.target1:
        err[label] = cfg.target1 - leb[label]
    else:
        err[label] = 0.0
    return err


def correlation_proportional(fwd, bwd) -> np.ndarray:
    """Elementwise product of forward and backward integrals."""
    return np.asarray(fwd, dtype=float) * np.asarray(bwd, dtype=float)


def correlation_integral(fwd, bwd):
    """Product of the two element sums: one scalar shared by all K1 entries."""
    return (np.asarray(fwd, dtype=float).sum(axis=-1)
            * np.asarray(bwd, dtype=float).sum(axis=-1))


def correlation_differential(fwd, bwd, is_forward_input_node) -> np.ndarray:
    """Elementwise product masked to neurons driven in the forward pass."""
    flag = np.asarray(is_forward_input_node, dtype=float)
    return correlation_proportional(fwd, bwd) * flag[..., None]


def squash(g1, kt: float):
    """Bounded adjustment: atan(g1 * kt) / kt, so |result| < pi/(2 kt)."""
    if kt <= 0:
        raise ValueError("kt must be positive")
    return np.arctan(np.asarray(g1, dtype=float) * kt) / kt


def _clamped(arr, lo, hi):
    out = np.clip(arr, lo, hi)
    return out, int(np.count_nonzero(out != arr))


def apply_updates(p: NeuronParams, g2_k1: float, g2_k2, g2_k3, gate: bool,
                  cfg: TrainingConfig):
    """One neuron's gated multiplicative update.

    Returns (new_params, clamp_events).  Reference implementation; the
    training loop uses the vectorized equivalent and tests pin them
    together.
    """
    if not gate:
        return p, 0
    k1, k2, k3 = p.k1.copy(), p.k2.copy(), p.k3.copy()
    clamps = 0
    if "integral_K1" in cfg.strategies:
        k1 = k1 * np.exp(+float(g2_k1))
    if cfg.case2_paired_k1:
        k1 = k1 * np.exp(+np.asarray(g2_k3, dtype=float))
    if "differential_K2" in cfg.strategies:
        k2 = k2 * np.exp(-np.asarray(g2_k2, dtype=float))
    if "proportional_K3" in cfg.strategies:
        k3 = k3 * np.exp(-np.asarray(g2_k3, dtype=float))
    k1, c1 = _clamped(k1, cfg.clamp_min, cfg.clamp_max)
    k2, c2 = _clamped(k2, cfg.clamp_min, cfg.clamp_max)
    k3, c3 = _clamped(k3, cfg.clamp_min, cfg.clamp_max)
    clamps = c1 + c2 + c3
    return NeuronParams(k1, k2, k3), clamps


class Trainer:
    """Owns the working parameters, settled states, and the sample loop."""

    def __init__(self, graph: NetworkGraph, cfg: TrainingConfig,
                 sim_cfg: SimConfig):
        self.graph = graph
        self.cfg = cfg
        self.sim_cfg = sim_cfg
        self.sim = Simulator(graph, sim_cfg)
        self.k1 = np.array(graph.k1)
        self.k2 = np.array(graph.k2)
        self.k3 = np.array(graph.k3)
        b0f, okf = core.solve_fixed_points(self.k1, self.k2, self.k3, "forward")
        b0b, okb = core.solve_fixed_points(self.k1, self.k2, self.k3, "inverse")
        if not (okf.all() and okb.all()):
            raise core.FixedPointDivergenceError(
                "initial parameters admit no settled state")
        self.b0f = b0f
        self.b0b = b0b
        self.first_layer = graph.layer_of == 0

    @property
    def params(self):
        return self.k1, self.k2, self.k3

    def _inputnode_flags(self, drive_max: np.ndarray) -> np.ndarray:
        driven = drive_max > 0.0
        if self.cfg.inputnode_first_layer_only:
            return self.first_layer & driven
        return driven

    def _gates(self, fwd_int, bwd_int) -> np.ndarray:
        eps = self.cfg.signal_gate_eps
        return ((np.max(np.abs(fwd_int), axis=1) > eps)
                & (np.max(np.abs(bwd_int), axis=1) > eps))

    def _vector_update(self, fwd_int, bwd_int, flags, gates):
        """Apply the enabled strategies to every gated neuron at once.

        Returns (clamp_events, updated_idx, reverted_idx).
        """
        cfg = self.cfg
        idx = np.flatnonzero(gates)
        if idx.size == 0:
            return 0, idx, np.array([], dtype=int)
        fwd = fwd_int[idx]
        bwd = bwd_int[idx]
        k1 = self.k1[idx].copy()
        k2 = self.k2[idx].copy()
        k3 = self.k3[idx].copy()
        g2_prop = squash(correlation_proportional(fwd, bwd), cfg.kt)
        if "integral_K1" in cfg.strategies:
            g2_int = squash(correlation_integral(fwd, bwd), cfg.kt)
            k1 = k1 * np.exp(+g2_int)[:, None]
        if cfg.case2_paired_k1:
            k1 = k1 * np.exp(+g2_prop)
        if "differential_K2" in cfg.strategies:
            g2_diff = squash(
                correlation_differential(fwd, bwd, flags[idx]), cfg.kt)
            k2 = k2 * np.exp(-g2_diff)
        if "proportional_K3" in cfg.strategies:
            k3 = k3 * np.exp(-g2_prop)
        clamps = 0
        for arr in (k1, k2, k3):
            clipped = np.clip(arr, cfg.clamp_min, cfg.clamp_max)
            clamps += int(np.count_nonzero(clipped != arr))
            arr[:] = clipped

        b0f_new, okf = core.solve_fixed_points(k1, k2, k3, "forward",
                                               prev=self.b0f[idx])
        b0b_new, okb = core.solve_fixed_points(k1, k2, k3, "inverse",
                                               prev=self.b0b[idx])
        ok = okf & okb
        good = idx[ok]
        self.k1[good] = k1[ok]
        self.k2[good] = k2[ok]
        self.k3[good] = k3[ok]
        self.b0f[good] = b0f_new[ok]
        self.b0b[good] = b0b_new[ok]
        return clamps, good, idx[~ok]

    def train_step(self, x, label: int):
        """One sample: passes, errors, correlations, gated updates."""
        fwd = self.sim.run_forward(x, params=self.params, b0=self.b0f)
        pred = classify(fwd.leb)
        err = output_error(fwd.leb, label, self.cfg)
        if not np.any(err != 0.0):
            return pred, err, 0, np.array([], dtype=int), np.array([], dtype=int)
        bwd = self.sim.run_backward(err, params=self.params, b0=self.b0b)
        gates = self._gates(fwd.integrals, bwd.integrals)
        flags = self._inputnode_flags(fwd.drive_max)
        if not self.cfg.strategies and not self.cfg.case2_paired_k1:
            return pred, err, 0, np.array([], dtype=int), np.array([], dtype=int)
        clamps, updated, reverted = self._vector_update(
            fwd.integrals, bwd.integrals, flags, gates)
        return pred, err, clamps, updated, reverted

    def train_epoch(self, inputs, labels) -> EpochMetrics:
        """Run every sample once, updating between samples.

        A divergence aborts the epoch and returns partial metrics with the
        offending neuron recorded.
        """
        inputs = np.asarray(inputs, dtype=float)
        labels = np.asarray(labels)
        m = EpochMetrics()
        correct = 0
        abs_err_total = 0.0
        for i in range(len(inputs)):
            try:
                pred, err, clamps, updated, reverted = self.train_step(
                    inputs[i], int(labels[i]))
            except core.DivergenceError as exc:
                m.aborted = True
                m.diverged_neuron = exc.neuron
                break
            m.n_samples += 1
            correct += int(pred == int(labels[i]))
            abs_err_total += float(np.mean(np.abs(err)))
            m.clamp_events += clamps
            m.updated_neurons += int(len(updated))
            m.reverted_neurons += int(len(reverted))
        if m.n_samples:
            m.accuracy = correct / m.n_samples
            m.mean_abs_error = abs_err_total / m.n_samples
        return m

    def evaluate(self, inputs, labels, batch_size: int = 256):
        """Accuracy and mean |error| without updates; batched passes."""
        inputs = np.asarray(inputs, dtype=float)
        labels = np.asarray(labels)
        preds = np.empty(len(inputs), dtype=int)
        abs_err_total = 0.0
        for lo in range(0, len(inputs), batch_size):
            chunk = inputs[lo:lo + batch_size]
            res = self.sim.run_forward(chunk, params=self.params, b0=self.b0f)
            leb = np.atleast_2d(res.leb)
            preds[lo:lo + len(chunk)] = np.argmax(leb, axis=1)
            for j, row in enumerate(leb):
                err = output_error(row, int(labels[lo + j]), self.cfg)
                abs_err_total += float(np.mean(np.abs(err)))
        accuracy = float(np.mean(preds == labels)) if len(inputs) else 0.0
        return accuracy, abs_err_total / max(len(inputs), 1), preds

    def snapshot_graph(self) -> NetworkGraph:
        """Current parameters frozen back into a graph."""
        return topology.replace_params(self.graph, self.k1, self.k2, self.k3)


def checkpoint_to_json(trainer: Trainer, rng_state=None) -> str:
    """Bundle graph, parameters, settled states, and RNG state (v1)."""
    doc = {
        "version": CHECKPOINT_VERSION,
        "graph": json.loads(topology.to_json(trainer.graph)),
        "k1": trainer.k1.tolist(),
        "k2": trainer.k2.tolist(),
        "k3": trainer.k3.tolist(),
        "b0_forward": trainer.b0f.tolist(),
        "b0_backward": trainer.b0b.tolist(),
        "training": {
            "target1": trainer.cfg.target1,
            "target2": trainer.cfg.target2,
            "kt": trainer.cfg.kt,
            "signal_gate_eps": trainer.cfg.signal_gate_eps,
            "strategies": sorted(trainer.cfg.strategies),
            "epochs": trainer.cfg.epochs,
            "clamp_min": trainer.cfg.clamp_min,
            "clamp_max": trainer.cfg.clamp_max,
            "case2_paired_k1": trainer.cfg.case2_paired_k1,
            "inputnode_first_layer_only": trainer.cfg.inputnode_first_layer_only,
        },
        "sim": {
            "horizon_T": trainer.sim_cfg.horizon_T,
            "step_h": trainer.sim_cfg.step_h,
            "input_hold": trainer.sim_cfg.input_hold,
        },
        "rng_state": rng_state,
    }
    return json.dumps(doc, sort_keys=True)


def trainer_from_checkpoint(text: str):
    """Rebuild a Trainer (and the saved RNG state) from checkpoint text."""
    doc = json.loads(text)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    graph = topology.from_json(json.dumps(doc["graph"]))
    tr_doc = dict(doc["training"])
    tr_doc["strategies"] = frozenset(tr_doc["strategies"])
    cfg = TrainingConfig(**tr_doc)
    sim_cfg = SimConfig(**doc["sim"])
    trainer = Trainer(graph, cfg, sim_cfg)
    trainer.k1 = np.array(doc["k1"], dtype=float)
    trainer.k2 = np.array(doc["k2"], dtype=float)
    trainer.k3 = np.array(doc["k3"], dtype=float)
    trainer.b0f = np.array(doc["b0_forward"], dtype=float)
    trainer.b0b = np.array(doc["b0_backward"], dtype=float)
    return trainer, doc.get("rng_state")
