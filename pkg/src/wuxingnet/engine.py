"""Whole-network simulation: coupled forward and backward passes.

The network evolves as one ODE system.  Each neuron's local dynamics come
from wuxingnet.core; coupling adds, to every input-role element, the sum of
deviation signals D = E - B0 emitted by the upstream output-role elements
wired to it (fan-out copies, fan-in sums).  External features are held
constant over [0, T] as drive on the first-layer ports; the backward pass
runs the inverse dynamics on the reversed wiring and injects class errors
at the class ports the same way.

Signal integrals accumulate by the trapezoid rule on the integrator's own
step grid; Leb readings are time-averages of the class-port deviation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import core
from .core import DivergenceError, N_ELEMENTS
from .topology import NetworkGraph


@dataclass(frozen=True)
class SimConfig:
    """Integration window: fixed-step RK4 over [0, horizon_T]."""

    horizon_T: float = 10.0
    step_h: float = 0.01
    input_hold: str = "constant"

    def __post_init__(self):
        if not (0 < self.step_h <= self.horizon_T):
            raise ValueError("need 0 < step_h <= horizon_T")
        n = self.horizon_T / self.step_h
        if abs(n - round(n)) > 1e-9:
            raise ValueError("horizon_T must be an integer number of steps")
        if self.input_hold != "constant":
            raise ValueError(f"unsupported input profile {self.input_hold!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon_T / self.step_h))


@dataclass(frozen=True)
class ForwardResult:
    """Forward pass outputs: class readings plus per-element integrals."""

    leb: np.ndarray           # (C,) or (B, C)
    integrals: np.ndarray     # (N, 5) or (B, N, 5): integral of D dt
    final_state: np.ndarray
    drive_max: np.ndarray     # (N,) or (B, N): max |drive| seen per neuron


@dataclass(frozen=True)
class BackwardResult:
    integrals: np.ndarray     # integral of (E_hat - B0_hat) dt
    final_state: np.ndarray
    drive_max: np.ndarray


class Simulator:
    """Reusable pass runner for one topology.

    Parameter stacks and fixed points default to the graph's own, but the
    trainer passes its working copies so nothing is re-solved per sample.
    """

    def __init__(self, graph: NetworkGraph, cfg: SimConfig):
        if graph.direction != "forward":
            raise ValueError("simulation expects a forward-direction graph")
        self.graph = graph
        self.cfg = cfg
        n = graph.n_neurons
        self.n = n
        e = graph.edges
        flat_src = e[:, 0].astype(np.int64) * N_ELEMENTS + e[:, 1]
        flat_dst = e[:, 2].astype(np.int64) * N_ELEMENTS + e[:, 3]
        ones = np.ones(len(e))
        dim = n * N_ELEMENTS
        self.w_fwd = sp.csr_matrix((ones, (flat_dst, flat_src)), shape=(dim, dim))
        self.w_bwd = self.w_fwd.T.tocsr()
        self.in_flat = np.array([nn * N_ELEMENTS + el
                                 for _, (nn, el) in sorted(graph.external_inputs.items())],
                                dtype=np.int64)
        self.out_flat = np.array([nn * N_ELEMENTS + el
                                  for _, (nn, el) in sorted(graph.external_outputs.items())],
                                 dtype=np.int64)
        self._b0f = None
        self._b0b = None

    def _default_b0(self, direction: str) -> np.ndarray:
        cached = self._b0f if direction == "forward" else self._b0b
        if cached is None:
            b, ok = core.solve_fixed_points(self.graph.k1, self.graph.k2,
                                            self.graph.k3, direction=direction)
            if not ok.all():
                raise core.FixedPointDivergenceError(
                    f"no settled {direction} state for neurons {np.flatnonzero(~ok)[:5]}")
            if direction == "forward":
                self._b0f = b
            else:
                self._b0b = b
            cached = b
        return cached

    def _run(self, direction: str, ext_flat: np.ndarray, params=None, b0=None,
             trace_path=None):
        g = self.graph
        k1, k2, k3 = params if params is not None else (g.k1, g.k2, g.k3)
        if b0 is None:
            b0 = self._default_b0(direction)
        local = core.forward_rhs if direction == "forward" else core.inverse_rhs
        w = self.w_fwd if direction == "forward" else self.w_bwd
        h = self.cfg.step_h
        n_steps = self.cfg.n_steps
        batch = ext_flat.shape[0]
        state = np.broadcast_to(b0, (batch, self.n, N_ELEMENTS)).copy()

        def drive_at(s):
            dev_flat = (s - b0).reshape(batch, -1)
            coupled = (w @ dev_flat.T).T
            return (coupled + ext_flat).reshape(batch, self.n, N_ELEMENTS)

        def full_rhs(s):
            return local(s, k1, k2, k3) + drive_at(s)

        trace_rows = [] if trace_path is not None else None
        dev = state - b0
        acc = 0.5 * dev
        # Divergence is detected by the finiteness check after each step, so
        # the overflow warnings numpy emits on the way to inf are just noise.
        with np.errstate(over="ignore", invalid="ignore"):
            drive_max = np.max(np.abs(drive_at(state)), axis=2)  # (batch, n)
            if trace_rows is not None:
                self._trace_append(trace_rows, 0.0, state[0], dev[0])
            for step in range(1, n_steps + 1):
                d1 = drive_at(state)
                np.maximum(drive_max, np.max(np.abs(d1), axis=2), out=drive_max)
                s1 = local(state, k1, k2, k3) + d1
                s2 = full_rhs(state + 0.5 * h * s1)
                s3 = full_rhs(state + 0.5 * h * s2)
                s4 = full_rhs(state + h * s3)
                state = state + (h / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4)
                if not np.all(np.isfinite(state)):
                    bad = ~np.all(np.isfinite(state), axis=2)
                    b_i, n_i = np.argwhere(bad)[0]
                    raise DivergenceError(
                        f"state diverged at neuron {int(n_i)} (t={step * h:.4f})",
                        neuron=int(n_i), t=step * h)
                dev = state - b0
                acc += dev if step < n_steps else 0.5 * dev
                if trace_rows is not None:
                    self._trace_append(trace_rows, step * h, state[0], dev[0])
        integrals = acc * h
        drive_max = np.maximum(drive_max, np.max(np.abs(drive_at(state)), axis=2))
        if trace_path is not None:
            self._write_trace(trace_path, trace_rows)
        return integrals, state, drive_max

    def _trace_append(self, rows, t, state_n5, dev_n5):
        for nn in range(self.n):
            for el in range(N_ELEMENTS):
                rows.append((t, nn, el, state_n5[nn, el], dev_n5[nn, el]))

    @staticmethod
    def _write_trace(path, rows):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "neuron", "element", "E", "D"])
            for t, nn, el, e_val, d_val in rows:
                writer.writerow([repr(float(t)), nn, el,
                                 repr(float(e_val)), repr(float(d_val))])

    def _scatter(self, values, flat_idx) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[None, :]
        if values.shape[1] != len(flat_idx):
            raise ValueError(
                f"expected {len(flat_idx)} port values, got {values.shape[1]}")
        if not np.all(np.isfinite(values)):
            raise core.NumericDomainError("port values must be finite")
        ext = np.zeros((values.shape[0], self.n * N_ELEMENTS))
        ext[:, flat_idx] = values
        return ext

    def run_forward(self, x, params=None, b0=None, trace_path=None) -> ForwardResult:
        single = np.asarray(x).ndim == 1
        ext = self._scatter(x, self.in_flat)
        integrals, state, drive_max = self._run("forward", ext, params=params,
                                                b0=b0, trace_path=trace_path)
        leb = integrals.reshape(ext.shape[0], -1)[:, self.out_flat] / self.cfg.horizon_T
        if single:
            return ForwardResult(leb[0], integrals[0], state[0], drive_max[0])
        return ForwardResult(leb, integrals, state, drive_max)

    def run_backward(self, err, params=None, b0=None, trace_path=None) -> BackwardResult:
        single = np.asarray(err).ndim == 1
        ext = self._scatter(err, self.out_flat)
        integrals, state, drive_max = self._run("inverse", ext, params=params,
                                                b0=b0, trace_path=trace_path)
        if single:
            return BackwardResult(integrals[0], state[0], drive_max[0])
        return BackwardResult(integrals, state, drive_max)


def forward_pass(g: NetworkGraph, x, cfg: SimConfig, trace_path=None) -> ForwardResult:
    """Run one forward pass from every neuron's settled state.

    ``x`` holds one value per external input port, injected as constant
    drive.  Returns class Leb readings and all per-element signal integrals.
    """
    return Simulator(g, cfg).run_forward(x, trace_path=trace_path)


def backward_pass(g: NetworkGraph, err, cfg: SimConfig, trace_path=None) -> BackwardResult:
    """Run one backward pass: inverse dynamics on the reversed wiring.

    ``err`` holds one value per class port, injected there as constant
    drive while signals flow toward the input layer.
    """
    return Simulator(g, cfg).run_backward(err, trace_path=trace_path)


def compute_leb(forward_integrals: np.ndarray, g: NetworkGraph,
                cfg: SimConfig) -> np.ndarray:
    """Time-average the class-port deviation integrals: Leb_c = I_c / T."""
    flat = np.asarray(forward_integrals).reshape(-1)
    ports = [nn * N_ELEMENTS + el
             for _, (nn, el) in sorted(g.external_outputs.items())]
    return flat[ports] / cfg.horizon_T


def classify(leb) -> int:
    """Largest Leb component wins; ties go to the lowest class index."""
    leb = np.asarray(leb)
    if leb.size == 0:
        raise ValueError("empty class vector")
    return int(np.argmax(leb))
