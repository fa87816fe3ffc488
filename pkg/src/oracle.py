"""
Brute-force reference computations for small, enumerable problems.

Everything here is deliberately written against the public ctmc_core
operations only (forward kernels, rate matrices), never against the
objective internals it is used to check.

Costs: exact marginals are O(|supp p_data| * S * |t_grid|), the master
equation O(S^2) per step, exact_nll_small_chain O(S^2 * grid_size) and
ExactReverseModel O(M * L * S) per evaluated sequence.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

try:
    from .ctmc_core import RateMatrix, Schedule, forward_kernel
    from .errors import DomainError, UnreachableStateError
    from .model import HeadOutput, _as_batch
except ImportError:
    from ctmc_core import RateMatrix, Schedule, forward_kernel
    from errors import DomainError, UnreachableStateError
    from model import HeadOutput, _as_batch


MAX_MASTER_STEP = 1e-3
MIN_NLL_GRID = 10_000
MAX_NLL_STATES = 4


@dataclass
class MarginalTable:
    """
    Exact marginals q_t(i) and posteriors p(x0 | x_t = i) on a time grid.

    Shapes: t_grid (K,), q (K, S), posterior (K, S, S) indexed [t, state, x0].
    """

    t_grid: np.ndarray
    q: np.ndarray
    posterior: np.ndarray

    def __post_init__(self):
        if np.any(np.abs(self.q.sum(axis=1) - 1.0) > 1e-10):
            raise DomainError("marginal rows must sum to 1")
        if np.any(np.abs(self.posterior.sum(axis=2) - 1.0) > 1e-10):
            raise DomainError("posterior rows must sum to 1")

    @property
    def num_states(self) -> int:
        return self.q.shape[1]

    def at(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.t_grid - t)))
        if not np.isclose(self.t_grid[k], t, rtol=0.0, atol=1e-12):
            raise DomainError(f"t = {t} is not on the table's grid")
        return self.q[k]

    def to_csv(self) -> str:
        S = self.num_states
        header = ["t", "state", "q"] + [f"posterior_{j}" for j in range(S)]
        lines = [",".join(header)]
        for k, t in enumerate(self.t_grid):
            for i in range(S):
                values = [format(t, ".12g"), str(i), format(self.q[k, i], ".17g")]
                values += [format(v, ".17g") for v in self.posterior[k, i]]
                lines.append(",".join(values))
        return "\n".join(lines) + "\n"

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv(), encoding="utf-8")
        return path

    @classmethod
    def from_csv(cls, text: str) -> "MarginalTable":
        lines = [ln for ln in text.strip().splitlines() if ln]
        rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
        S = rows.shape[1] - 3
        t_grid = rows[::S, 0]
        return cls(t_grid, rows[:, 2].reshape(-1, S), rows[:, 3:].reshape(-1, S, S))


def exact_marginals(schedule: Schedule, p_data, t_grid: Sequence[float]) -> MarginalTable:
    """
    q_t(i) = sum_x0 p_data(x0) q_{t|0}(i|x0) and p(x0|x_t) by Bayes' rule.

    Unreachable states (q_t(i) = 0) get p_data as their posterior.
    """
    p = np.asarray(p_data, dtype=float)
    S = schedule.num_states
    if p.shape != (S,) or abs(p.sum() - 1.0) > 1e-10:
        raise DomainError("p_data must be a probability vector over the state space")
    t_grid = np.asarray(t_grid, dtype=float)
    q = np.zeros((t_grid.size, S))
    post = np.zeros((t_grid.size, S, S))
    for k, t in enumerate(t_grid):
        joint = np.stack([p[x0] * forward_kernel(schedule, t, x0) for x0 in range(S)], axis=1)  # [i, x0]
        q[k] = joint.sum(axis=1)
        for i in range(S):
            post[k, i] = joint[i] / q[k, i] if q[k, i] > 0.0 else p
    return MarginalTable(t_grid, q, post)


def integrate_master_equation(rate: RateMatrix, q0, t_end: float, step: float, t_start: float = 0.0,
                              return_drift: bool = False) -> Union[np.ndarray, Tuple[np.ndarray, float]]:
    """
    Integrate dq/dt = q R_t with classical RK4 from t_start to t_end.

    The state is renormalized after every step; the largest pre-renormalization
    deviation of sum(q) from 1 is logged (and returned with ``return_drift``).
    """
    if not 0.0 < step <= MAX_MASTER_STEP:
        raise DomainError(f"step must lie in (0, {MAX_MASTER_STEP}], got {step}")
    q = np.array(q0, dtype=float)
    n = int(np.ceil((t_end - t_start) / step - 1e-9))
    h = (t_end - t_start) / n if n > 0 else 0.0
    drift = 0.0

    def f(t: float, y: np.ndarray) -> np.ndarray:
        return y @ rate.matrix(t)

    t = t_start
    for _ in range(n):
        k1 = f(t, q)
        k2 = f(t + 0.5 * h, q + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, q + 0.5 * h * k2)
        k4 = f(t + h, q + h * k3)
        q = q + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        total = q.sum()
        drift = max(drift, abs(total - 1.0))
        q = q / total
        t += h
    logging.debug(f"Master equation: {n} steps, max drift {drift:.3e}")
    return (q, drift) if return_drift else q


def _reverse_chain_nll(schedule: Schedule, model, x0: int, grid_size: int) -> float:
    S = schedule.num_states
    t_top = schedule.horizon - schedule.eps
    h = t_top / grid_size
    times = t_top - h * np.arange(grid_size)
    X = np.tile(np.arange(S), grid_size)[:, None]
    lam, r = model.forward_batch(X, np.repeat(times, S))
    rates = (lam[:, 0, None] * r[:, 0, :]).reshape(grid_size, S, S)
    exits = rates.sum(axis=2)
    p = schedule.pi.copy()
    for n in range(grid_size):
        p = p * (1.0 - h * exits[n]) + h * (p @ rates[n])
    if p[x0] <= 0.0:
        return float("inf")
    return float(-np.log(p[x0]))


def exact_nll_small_chain(schedule: Schedule, model, x0: int, grid_size: int = MIN_NLL_GRID) -> float:
    """
    -log p_theta(x0) for the model's reverse chain started from pi at T - eps.

    Euler transition products on a uniform grid of ``grid_size`` steps down to
    t = 0, Richardson-extrapolated with the doubled grid.
    """
    if schedule.num_states > MAX_NLL_STATES:
        raise DomainError(f"exact NLL supports at most {MAX_NLL_STATES} states")
    if getattr(model, "seq_len", 1) != 1:
        raise DomainError("exact NLL needs a single-token model")
    if grid_size < MIN_NLL_GRID:
        raise DomainError(f"grid_size must be at least {MIN_NLL_GRID}")
    if not 0 <= x0 < schedule.num_states:
        raise DomainError(f"state out of range: {x0}")
    coarse = _reverse_chain_nll(schedule, model, x0, grid_size)
    fine = _reverse_chain_nll(schedule, model, x0, 2 * grid_size)
    if not np.isfinite(coarse) or not np.isfinite(fine):
        return float("inf")
    return 2.0 * fine - coarse


def finite_difference_gradient(loss: Callable[[np.ndarray], float], params, coords: Sequence[int],
                               step: float = 1e-6) -> np.ndarray:
    """Central differences (L(theta + h e_k) - L(theta - h e_k)) / 2h at the given coordinates."""
    if not 1e-8 <= step <= 1e-4:
        raise DomainError(f"step must lie in [1e-8, 1e-4], got {step}")
    base = np.array(params, dtype=float)
    out = np.empty(len(coords))
    for n, k in enumerate(coords):
        plus, minus = base.copy(), base.copy()
        plus[k] += step
        minus[k] -= step
        out[n] = (loss(plus) - loss(minus)) / (2.0 * step)
    return out


class ExactReverseModel:
    """
    The exact marginal reverse rates for enumerable sequence data.

    Data is a list of support sequences (M, L) with probabilities (M,); every
    position is noised independently by ``schedule``. Exposes the same
    interface as TwoHeadModel so it can stand in for a perfectly trained model.
    """

    def __init__(self, schedule: Schedule, support, probs):
        support = np.atleast_2d(np.asarray(support, dtype=int))
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (support.shape[0],) or abs(probs.sum() - 1.0) > 1e-10 or np.any(probs < 0):
            raise DomainError("probs must be a probability vector over the support")
        if np.any(support < 0) or np.any(support >= schedule.num_states):
            raise DomainError("support holds out-of-range states")
        keep = probs > 0
        self.schedule = schedule
        self.support = support[keep]
        self.log_probs = np.log(probs[keep])
        self.num_states = schedule.num_states
        self.seq_len = support.shape[1]
        self.horizon = schedule.horizon

    @classmethod
    def from_distribution(cls, schedule: Schedule, p_data) -> "ExactReverseModel":
        """Single-token model for a distribution over the S states."""
        p = np.asarray(p_data, dtype=float)
        return cls(schedule, np.arange(p.size)[:, None], p)

    def _kernel(self, t: np.ndarray) -> np.ndarray:
        """Q[n, m, l, j] = q_{t_n|0}(j | support[m, l])."""
        a = np.asarray(self.schedule.alpha(t), dtype=float)[:, None, None, None]
        onehot = (self.support[..., None] == np.arange(self.num_states)).astype(float)
        return a * onehot[None] + (1.0 - a) * self.schedule.pi

    def _weights(self, X: np.ndarray, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        Q = self._kernel(t)
        here = np.take_along_axis(Q, X[:, None, :, None], axis=3)[..., 0]  # (N, M, L)
        with np.errstate(divide="ignore"):
            logw = self.log_probs[None, :] + np.log(here).sum(axis=2)
        top = logw.max(axis=1)
        if np.any(~np.isfinite(top)):
            bad = int(np.flatnonzero(~np.isfinite(top))[0])
            raise UnreachableStateError(f"sequence {X[bad].tolist()} has zero probability at t = {t[bad]}")
        w = np.exp(logw - top[:, None])
        return w / w.sum(axis=1, keepdims=True), Q, here

    def posterior(self, x_t, t: float) -> np.ndarray:
        """p(x0 = support[m] | x_t) for every support entry m."""
        X, tt = _as_batch(x_t, t)
        return self._weights(X, tt)[0][0]

    def forward_batch(self, X, t) -> Tuple[np.ndarray, np.ndarray]:
        X, t = _as_batch(X, t)
        if X.shape[1] != self.seq_len:
            raise DomainError(f"expected sequences of length {self.seq_len}, got {X.shape[1]}")
        self.schedule.check_time(t)
        w, Q, here = self._weights(X, t)
        scale = np.where(here > 0.0, w[..., None] / np.where(here > 0.0, here, 1.0), 0.0)  # (N, M, L)
        ratio = np.einsum("nml,nmlj->nlj", scale, Q)
        c = np.asarray(self.schedule.rate_scale(t), dtype=float)
        per_pair = c[:, None, None] * self.schedule.pi[X][..., None] * ratio
        np.put_along_axis(per_pair, X[..., None], 0.0, axis=-1)
        lam = per_pair.sum(axis=-1)
        r = np.divide(per_pair, lam[..., None], out=np.zeros_like(per_pair), where=lam[..., None] > 0.0)
        return lam, r

    def forward(self, x_t, t: float) -> HeadOutput:
        x = np.atleast_1d(np.asarray(x_t, dtype=int))
        lam, r = self.forward_batch(x[None, :], t)
        return HeadOutput(x, lam[0], r[0])

    def time_breakpoints(self) -> Tuple[float, ...]:
        return ()
