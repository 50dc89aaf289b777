"""Fractional Adams-Bashforth predictor for Caputo initial value problems.

Solves D^beta X = f(t, X), X(0) = x0, for 0 < beta <= 1 on the uniform grid
t_j = j h.  Every step sums the right-hand side over the whole history, so a
run of n steps costs O(n^2) right-hand side combinations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, InputParseError, NonFiniteError, ShapeError
from .special_fn import gamma_fn

RhsFn = Callable[[float, np.ndarray], np.ndarray]

# corrector(k_next, t_next, predicted_state, rhs_history) -> corrected_state
Corrector = Callable[[int, float, np.ndarray, np.ndarray], np.ndarray]

_SPLIT = 134217729.0  # 2**27 + 1, Dekker splitting constant for binary64


@dataclass(frozen=True)
class FdeConfig:
    beta: float
    step_h: float
    horizon_T: float

    def __post_init__(self):
        if not (math.isfinite(self.beta) and 0 < self.beta <= 1):
            raise ConfigError(f"FdeConfig: beta must lie in (0, 1], got {self.beta!r}")
        if not (math.isfinite(self.step_h) and self.step_h > 0):
            raise ConfigError(f"FdeConfig: step_h must be > 0, got {self.step_h!r}")
        if not (math.isfinite(self.horizon_T) and self.horizon_T > 0):
            raise ConfigError(f"FdeConfig: horizon_T must be > 0, got {self.horizon_T!r}")
        if self.n_steps < 1:
            raise ConfigError(
                f"FdeConfig: horizon_T = {self.horizon_T!r} is shorter than half a step (h = {self.step_h!r})"
            )

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon_T / self.step_h))

    def with_beta(self, beta: float) -> "FdeConfig":
        return FdeConfig(beta=beta, step_h=self.step_h, horizon_T=self.horizon_T)


@dataclass(frozen=True)
class Trajectory:
    """Solver output.

    ``states[j]`` is X(t_j) for j = 0..n; ``rhs_history[j]`` is f(t_j, X_j)
    for j = 0..n-1, the values the memory sum consumed.
    """

    times: np.ndarray
    states: np.ndarray
    rhs_history: np.ndarray
    beta: float
    step_h: float

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def state_shape(self) -> tuple[int, ...]:
        return tuple(self.states.shape[1:])

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def ab_coefficient(beta: float, h: float, j: int, k: int) -> float:
    """Memory weight b_{j,k+1} = (h^beta / beta) ((k+1-j)^beta - (k-j)^beta)."""
    if j < 0 or k < 0:
        raise IndexError(f"ab_coefficient: indices must be nonnegative, got j={j}, k={k}")
    if j > k:
        raise IndexError(f"ab_coefficient: requires j <= k, got j={j}, k={k}")
    m = k - j
    diff = 1.0 if m == 0 else m**beta * math.expm1(beta * math.log1p(1.0 / m))
    return (h**beta / beta) * diff


def _lag_weights(beta: float, h: float, count: int) -> np.ndarray:
    """w[m] = b_{j,k+1} for lag m = k - j, m = 0..count-1.

    (m+1)^beta - m^beta is formed as m^beta * expm1(beta * log1p(1/m)) so the
    weights keep full relative precision at large lags.
    """
    m = np.arange(count, dtype=float)
    diff = np.empty(count)
    diff[0] = 1.0
    if count > 1:
        mm = m[1:]
        diff[1:] = mm**beta * np.expm1(beta * np.log1p(1.0 / mm))
    return (h**beta / beta) * diff


def coefficient_row(beta: float, h: float, k: int) -> np.ndarray:
    """All weights b_{0,k+1}, ..., b_{k,k+1} used by step k -> k+1."""
    if k < 0:
        raise IndexError(f"coefficient_row: k must be >= 0, got {k}")
    return _lag_weights(beta, h, k + 1)[::-1].copy()


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, al * bl - (((p - ah * bh) - al * bh) - ah * bl)


def compensated_weighted_sum(weights: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """sum_j weights[j] * rows[j], accumulated in roughly doubled precision.

    Products are split with Dekker's error-free transform and the sum is a
    pairwise tree of error-free additions; collected rounding errors are added
    back at the end.
    """
    w = np.asarray(weights, dtype=float).reshape((-1,) + (1,) * (rows.ndim - 1))
    s, err = _two_prod(w, rows)
    correction = err.sum(axis=0)
    while s.shape[0] > 1:
        half = s.shape[0] // 2
        paired, e = _two_sum(s[: 2 * half : 2], s[1 : 2 * half : 2])
        correction = correction + e.sum(axis=0)
        if s.shape[0] % 2:
            paired = np.concatenate([paired, s[-1:]], axis=0)
        s = paired
    return s[0] + correction


def _check_finite(arr: np.ndarray, what: str, step: int) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{what} is not finite", step=step)


def _integrate(
    rhs: RhsFn,
    x0: np.ndarray,
    cfg: FdeConfig,
    weights: np.ndarray,
    corrector: Optional[Corrector],
) -> Trajectory:
    x0 = np.array(x0, dtype=float)
    _check_finite(x0, "initial state", 0)
    n = cfg.n_steps
    h = cfg.step_h
    times = np.arange(n + 1, dtype=float) * h
    states = np.empty((n + 1,) + x0.shape)
    history = np.empty((n,) + x0.shape)
    states[0] = x0
    inv_gamma = 1.0 / gamma_fn(cfg.beta)
    for k in range(n):
        f = np.asarray(rhs(times[k], states[k]), dtype=float)
        if f.shape != x0.shape:
            raise ShapeError(f"rhs returned shape {f.shape}, expected {x0.shape} (step {k})")
        _check_finite(f, "right-hand side", k)
        history[k] = f
        memory = compensated_weighted_sum(weights[k::-1], history[: k + 1])
        nxt = x0 + inv_gamma * memory
        if corrector is not None:
            nxt = np.asarray(corrector(k + 1, times[k + 1], nxt, history[: k + 1]), dtype=float)
        _check_finite(nxt, "state", k + 1)
        states[k + 1] = nxt
    for arr in (times, states, history):
        arr.flags.writeable = False
    return Trajectory(times=times, states=states, rhs_history=history, beta=cfg.beta, step_h=h)


def solve_fde(rhs: RhsFn, x0, cfg: FdeConfig, *, corrector: Optional[Corrector] = None) -> Trajectory:
    """Integrate D^beta X = rhs(t, X) from x0 with the fractional predictor.

    ``corrector`` is an extension hook applied to each predicted state; the
    default (None) keeps the plain predictor.  With beta = 1 the scheme is
    forward Euler.
    """
    weights = _lag_weights(cfg.beta, cfg.step_h, cfg.n_steps)
    return _integrate(rhs, x0, cfg, weights, corrector)


def solve_fde_pair(rhs: RhsFn, rhs_tilde: RhsFn, x0, x0_tilde, cfg: FdeConfig) -> tuple[Trajectory, Trajectory]:
    """Integrate a clean and a perturbed system on one grid with shared weights."""
    x0 = np.asarray(x0, dtype=float)
    x0_tilde = np.asarray(x0_tilde, dtype=float)
    if x0.shape != x0_tilde.shape:
        raise ShapeError(f"solve_fde_pair: initial states differ in shape, {x0.shape} vs {x0_tilde.shape}")
    weights = _lag_weights(cfg.beta, cfg.step_h, cfg.n_steps)
    weights.flags.writeable = False
    return _integrate(rhs, x0, cfg, weights, None), _integrate(rhs_tilde, x0_tilde, cfg, weights, None)


def write_trajectory(traj: Trajectory, path) -> None:
    """One row per time step: t, then the state flattened in C order."""
    path = Path(path)
    n = traj.states.shape[0]
    table = np.column_stack([traj.times, traj.states.reshape(n, -1)])
    shape = " ".join(str(s) for s in traj.state_shape)
    header = f"frond-trajectory beta={traj.beta!r} h={traj.step_h!r} shape={shape}"
    np.savetxt(path, table, fmt="%.17g", delimiter=",", header=header)


def read_trajectory(path) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`write_trajectory`; returns (times, states)."""
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
    if not first.startswith("# frond-trajectory"):
        raise InputParseError("missing trajectory header", path=path, line=1)
    try:
        shape = tuple(int(s) for s in first.split("shape=", 1)[1].split())
        table = np.loadtxt(path, delimiter=",", ndmin=2)
    except (IndexError, ValueError) as exc:
        raise InputParseError(f"malformed trajectory file ({exc})", path=path) from exc
    return table[:, 0], table[:, 1:].reshape((len(table),) + shape)
