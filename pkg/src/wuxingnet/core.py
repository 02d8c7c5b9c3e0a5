"""Single-neuron dynamics for five-element symmetric ODE neurons.

Each neuron is a ring of 5 state variables (elements) coupled by cyclic
generative and inhibitory terms, a symmetrized variant of predator-prey
dynamics.  With per-element parameter vectors k1, k2, k3 the forward system
reads

    de_i/dt = k1_i * e_{i-1} - k2_i * e_i - k3_i * e_i * e_{i-2} + u_i

and the inverse (signal-reversed) system shifts the parameter and element
offsets the other way around the ring:

    de_i/dt = k1_{i+1} * e_{i+1} - k2_i * e_i - k3_{i+2} * e_i * e_{i+2} + u_i

all indices mod 5.  The unforced system has a fixed point B0; with uniform
parameters B0 = (k1 - k2) / k3 on every element.  Deviation from B0 is the
signal a neuron emits.

All functions broadcast over leading axes, so a whole network's state can be
evaluated as an (n_neurons, 5) array in one call.  Everything here is pure;
arrays are never mutated in place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_ELEMENTS = 5

# Cyclic index tables: A[..., OFF_M1][..., i] == A[..., (i - 1) % 5], etc.
OFF_M1 = np.array([4, 0, 1, 2, 3])
OFF_M2 = np.array([3, 4, 0, 1, 2])
OFF_P1 = np.array([1, 2, 3, 4, 0])
OFF_P2 = np.array([2, 3, 4, 0, 1])

# Default parameter clamp bounds; (k1-k2)/k3 blows up as k3 -> 0, so keep
# every entry well away from zero.
K_MIN_DEFAULT = 1e-3
K_MAX_DEFAULT = 1e3

FIXED_POINT_TOL = 1e-8
FIXED_POINT_MAX_ITER = 100_000


class NumericDomainError(ValueError):
    """Raised when a state or parameter value is non-finite."""


class SingularParameterError(ValueError):
    """Raised when a fixed point is requested for k3 = 0."""


class FixedPointDivergenceError(RuntimeError):
    """Raised when fixed-point relaxation fails to settle within budget."""


class DivergenceError(RuntimeError):
    """Raised when integration produces a non-finite state.

    ``neuron`` identifies the offending neuron when known (set by the
    network engine; single-neuron helpers leave it None).
    """

    def __init__(self, message: str, neuron: int | None = None, t: float | None = None):
        super().__init__(message)
        self.neuron = neuron
        self.t = t


def as_element_vector(values) -> np.ndarray:
    """Validate and return a float64 copy of a 5-element vector."""
    arr = np.asarray(values, dtype=float)
    if arr.shape != (N_ELEMENTS,):
        raise ValueError(f"element vector must have shape (5,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericDomainError("element vector contains non-finite values")
    return arr.copy()


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class NeuronParams:
    """The trainable state of one neuron: positive vectors k1, k2, k3."""

    k1: np.ndarray
    k2: np.ndarray
    k3: np.ndarray

    def __post_init__(self):
        for name in ("k1", "k2", "k3"):
            vec = as_element_vector(getattr(self, name))
            if np.any(vec <= 0.0):
                raise ValueError(f"{name} entries must be strictly positive")
            object.__setattr__(self, name, _readonly(vec))

    @classmethod
    def uniform(cls, k1: float, k2: float, k3: float) -> "NeuronParams":
        return cls(np.full(N_ELEMENTS, float(k1)),
                   np.full(N_ELEMENTS, float(k2)),
                   np.full(N_ELEMENTS, float(k3)))

    def within_bounds(self, k_min: float = K_MIN_DEFAULT, k_max: float = K_MAX_DEFAULT) -> bool:
        lo = min(self.k1.min(), self.k2.min(), self.k3.min())
        hi = max(self.k1.max(), self.k2.max(), self.k3.max())
        return lo >= k_min and hi <= k_max


def forward_rhs(e, k1, k2, k3, drive=None):
    """Forward derivative, broadcasting over leading axes (last axis = 5)."""
    d = k1 * e[..., OFF_M1] - k2 * e - k3 * e * e[..., OFF_M2]
    if drive is not None:
        d = d + drive
    return d


def inverse_rhs(e, k1, k2, k3, drive=None):
    """Inverse derivative; parameter offsets shift with the elements."""
    d = k1[..., OFF_P1] * e[..., OFF_P1] - k2 * e - k3[..., OFF_P2] * e * e[..., OFF_P2]
    if drive is not None:
        d = d + drive
    return d


def _check_inputs(e, p: NeuronParams, drive):
    e = as_element_vector(e)
    if drive is None:
        drive = np.zeros(N_ELEMENTS)
    else:
        drive = as_element_vector(drive)
    return e, drive


def forward_derivative(e, p: NeuronParams, input_drive=None) -> np.ndarray:
    """de/dt of the forward system at state ``e`` under external drive."""
    e, drive = _check_inputs(e, p, input_drive)
    return forward_rhs(e, p.k1, p.k2, p.k3, drive)


def inverse_derivative(e, p: NeuronParams, input_drive=None) -> np.ndarray:
    """de/dt of the inverse (signal-reversed) system."""
    e, drive = _check_inputs(e, p, input_drive)
    return inverse_rhs(e, p.k1, p.k2, p.k3, drive)


def rk4_step(deriv, e, h):
    """One classical 4th-order Runge-Kutta step of size ``h`` under ``deriv``."""
    k1 = deriv(e)
    k2 = deriv(e + 0.5 * h * k1)
    k3 = deriv(e + 0.5 * h * k2)
    k4 = deriv(e + h * k3)
    return e + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_step(deriv, e, h: float) -> np.ndarray:
    """RK4 advance with divergence detection.

    Raises DivergenceError if the new state is non-finite; the caller knows
    which neuron the state belongs to.
    """
    if h <= 0:
        raise ValueError("step size must be positive")
    out = rk4_step(deriv, np.asarray(e, dtype=float), h)
    if not np.all(np.isfinite(out)):
        raise DivergenceError("integration step produced a non-finite state")
    return out


def analytic_fixed_point(k1: float, k2: float, k3: float) -> float:
    """Equilibrium (k1 - k2) / k3 of the uniform-parameter unforced system."""
    if k3 == 0.0:
        raise SingularParameterError("fixed point undefined for k3 = 0")
    return (k1 - k2) / k3


def fixed_point_seed(k1, k2, k3) -> np.ndarray:
    """Per-element analytic estimate (k1_i - k2_i) / k3_i, exact when uniform."""
    k3 = np.asarray(k3, dtype=float)
    if np.any(k3 == 0.0):
        raise SingularParameterError("fixed-point seed undefined for k3 = 0")
    return (np.asarray(k1, dtype=float) - np.asarray(k2, dtype=float)) / k3


def relax_fixed_points(k1, k2, k3, direction: str = "forward",
                       tol: float = FIXED_POINT_TOL,
                       max_iter: int = FIXED_POINT_MAX_ITER,
                       step: float = 0.01,
                       seed_state=None):
    """Settle the unforced system to its fixed point by integration.

    Runs RK4 on the unforced dynamics from the analytic per-element seed
    (or ``seed_state``) until the derivative max-norm falls below ``tol``.
    Works on stacked (..., 5) parameter arrays; rows are independent.

    Returns (states, converged) where ``converged`` is a boolean mask over
    the leading axes.
    """
    rhs = forward_rhs if direction == "forward" else inverse_rhs
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    k3 = np.asarray(k3, dtype=float)
    b = np.array(fixed_point_seed(k1, k2, k3) if seed_state is None else seed_state,
                 dtype=float)
    deriv = rhs(b, k1, k2, k3)
    resid = np.max(np.abs(deriv), axis=-1)
    active = resid >= tol
    for _ in range(max_iter):
        if not np.any(active):
            break
        b_new = rk4_step(lambda x: rhs(x, k1, k2, k3), b, step)
        bad = ~np.all(np.isfinite(b_new), axis=-1)
        if np.any(bad):
            # diverging rows are frozen and reported unconverged
            active = active & ~bad
            b_new = np.where(np.isfinite(b_new), b_new, b)
        b = np.where(active[..., None], b_new, b)
        resid = np.max(np.abs(rhs(b, k1, k2, k3)), axis=-1)
        active = active & (resid >= tol)
    converged = resid < tol
    return b, converged


def numeric_fixed_point(p: NeuronParams, tol: float = FIXED_POINT_TOL,
                        max_iter: int = FIXED_POINT_MAX_ITER,
                        direction: str = "forward") -> np.ndarray:
    """Relax one neuron's unforced system to its fixed point.

    Seeded by the per-element analytic estimate; raises
    FixedPointDivergenceError if the derivative max-norm does not fall
    below ``tol`` within ``max_iter`` relaxation steps.
    """
    b, ok = relax_fixed_points(p.k1, p.k2, p.k3, direction=direction,
                               tol=tol, max_iter=max_iter)
    if not bool(ok):
        raise FixedPointDivergenceError(
            f"fixed-point relaxation did not settle below {tol} in {max_iter} steps")
    return b


def _forward_jacobian(b, k1, k2, k3):
    n = b.shape[0]
    jac = np.zeros((n, N_ELEMENTS, N_ELEMENTS))
    rows = np.arange(N_ELEMENTS)
    jac[:, rows, OFF_M1] = k1
    jac[:, rows, rows] = -k2 - k3 * b[:, OFF_M2]
    jac[:, rows, OFF_M2] = -k3 * b
    return jac


def _inverse_jacobian(b, k1, k2, k3):
    n = b.shape[0]
    jac = np.zeros((n, N_ELEMENTS, N_ELEMENTS))
    rows = np.arange(N_ELEMENTS)
    k1s = k1[:, OFF_P1]
    k3s = k3[:, OFF_P2]
    jac[:, rows, OFF_P1] = k1s
    jac[:, rows, rows] = -k2 - k3s * b[:, OFF_P2]
    jac[:, rows, OFF_P2] = -k3s * b
    return jac


def newton_fixed_points(k1, k2, k3, direction: str = "forward",
                        tol: float = FIXED_POINT_TOL, max_iter: int = 50,
                        seed_state=None):
    """Newton refinement of fixed points for stacked (n, 5) parameters.

    Quadratically convergent from a nearby seed (defaults to the analytic
    per-element estimate).  Returns (states, converged).  Used as the fast
    path when parameters change by small multiplicative updates; the
    relaxation route stays the reference behaviour.
    """
    k1 = np.atleast_2d(np.asarray(k1, dtype=float))
    k2 = np.atleast_2d(np.asarray(k2, dtype=float))
    k3 = np.atleast_2d(np.asarray(k3, dtype=float))
    rhs = forward_rhs if direction == "forward" else inverse_rhs
    jac_fn = _forward_jacobian if direction == "forward" else _inverse_jacobian
    b = np.array(fixed_point_seed(k1, k2, k3) if seed_state is None
                 else np.atleast_2d(seed_state), dtype=float)
    n = b.shape[0]
    converged = np.zeros(n, dtype=bool)
    for _ in range(max_iter):
        f = rhs(b, k1, k2, k3)
        resid = np.max(np.abs(f), axis=-1)
        converged = np.isfinite(resid) & (resid < tol)
        if np.all(converged):
            break
        jac = jac_fn(b, k1, k2, k3)
        try:
            delta = np.linalg.solve(jac, -f[..., None])[..., 0]
        except np.linalg.LinAlgError:
            delta = np.full_like(b, np.nan)
            for i in range(n):
                if converged[i]:
                    delta[i] = 0.0
                    continue
                try:
                    delta[i] = np.linalg.solve(jac[i], -f[i])
                except np.linalg.LinAlgError:
                    pass
        delta = np.where(np.isfinite(delta), delta, 0.0)
        b = np.where(converged[:, None], b, b + delta)
    f = rhs(b, k1, k2, k3)
    resid = np.max(np.abs(f), axis=-1)
    converged = np.isfinite(resid) & (resid < tol)
    return b, converged


def solve_fixed_points(k1, k2, k3, direction: str = "forward",
                       tol: float = FIXED_POINT_TOL, prev=None):
    """Production fixed-point solver: Newton first, relaxation fallback.

    ``prev`` seeds the search (the previous fixed point during training);
    rows that neither route settles are returned with converged=False and
    hold the seed value.
    """
    k1 = np.atleast_2d(np.asarray(k1, dtype=float))
    k2 = np.atleast_2d(np.asarray(k2, dtype=float))
    k3 = np.atleast_2d(np.asarray(k3, dtype=float))
    b, ok = newton_fixed_points(k1, k2, k3, direction=direction, tol=tol,
                                seed_state=prev)
    if not np.all(ok):
        seed = b.copy()
        if prev is not None:
            seed[~ok] = np.atleast_2d(prev)[~ok]
        b2, ok2 = relax_fixed_points(k1, k2, k3, direction=direction, tol=tol,
                                     max_iter=20_000, step=0.05,
                                     seed_state=seed)
        recovered = ok2 & ~ok
        b[recovered] = b2[recovered]
        ok = ok | ok2
        if np.any(~ok) and prev is not None:
            b[~ok] = np.atleast_2d(prev)[~ok]
    return b, ok


def deviation(e, b0) -> np.ndarray:
    """Output signal D = E - B0, elementwise."""
    return np.asarray(e, dtype=float) - np.asarray(b0, dtype=float)


def simulate_unforced(p: NeuronParams, e0, horizon: float, step: float,
                      direction: str = "forward") -> np.ndarray:
    """Integrate one neuron without drive; returns the final state."""
    rhs = forward_rhs if direction == "forward" else inverse_rhs
    e = as_element_vector(e0)
    n_steps = int(round(horizon / step))
    for _ in range(n_steps):
        e = integrate_step(lambda x: rhs(x, p.k1, p.k2, p.k3), e, step)
    return e
