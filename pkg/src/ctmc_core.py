"""
Finite-state CTMC primitives.

Noise schedules and their forward kernels, time-dependent rate matrices,
the exit-rate / jump-distribution split of a rate row, and the true and
conditional reverse-time rates built from them.

Conventions used throughout the package:
  - states are integers in ``range(S)``; the mask token of a masked
    schedule is ``S - 1``
  - time is always the forward-process time t in [0, T], including when a
    reverse chain is simulated
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple, Optional, Tuple, Union

import numpy as np

try:
    from .errors import DomainError, SingularityError, UnreachableStateError
except ImportError:
    from errors import DomainError, SingularityError, UnreachableStateError


MAX_STATES = 4096
DEFAULT_EPS_FRACTION = 1e-3


class ScheduleKind(Enum):
    UNIFORM = "uniform"
    MASKED = "masked"


class AlphaFamily(Enum):
    LINEAR = "linear"
    COSINE = "cosine"


@dataclass(frozen=True)
class Schedule:
    """
    Noise schedule q_{t|0}(.|x0) = alpha_t e_{x0} + (1 - alpha_t) pi.

    Args:
        kind: Uniform reference distribution or absorbing mask state
        num_states: Size S of the state space (mask included)
        horizon: Final time T
        family: Shape of alpha_t ("linear" is 1 - t/T, "cosine" is cos(pi t / 2T))
        clamp_eps: Distance kept from both ends of [0, T] when rates are
            evaluated; defaults to 1e-3 * T
    """

    kind: ScheduleKind
    num_states: int
    horizon: float = 1.0
    family: AlphaFamily = AlphaFamily.LINEAR
    clamp_eps: Optional[float] = None

    def __post_init__(self):
        if not 2 <= self.num_states <= MAX_STATES:
            raise DomainError(f"num_states must be in [2, {MAX_STATES}], got {self.num_states}")
        if not self.horizon > 0:
            raise DomainError(f"horizon must be positive, got {self.horizon}")
        if self.kind is ScheduleKind.MASKED and self.num_states < 3:
            raise DomainError("masked schedules need at least two data tokens plus the mask")
        if self.clamp_eps is not None and not 0 < self.clamp_eps < self.horizon / 2:
            raise DomainError(f"clamp_eps must lie in (0, T/2), got {self.clamp_eps}")

    @property
    def eps(self) -> float:
        if self.clamp_eps is None:
            return DEFAULT_EPS_FRACTION * self.horizon
        return self.clamp_eps

    @property
    def mask_token(self) -> Optional[int]:
        return self.num_states - 1 if self.kind is ScheduleKind.MASKED else None

    @property
    def pi(self) -> np.ndarray:
        if self.kind is ScheduleKind.MASKED:
            p = np.zeros(self.num_states)
            p[self.num_states - 1] = 1.0
            return p
        return np.full(self.num_states, 1.0 / self.num_states)

    def check_time(self, t) -> None:
        t = np.asarray(t, dtype=float)
        slack = 1e-12 * self.horizon
        if np.any(~np.isfinite(t)) or np.any(t < -slack) or np.any(t > self.horizon + slack):
            raise DomainError(f"time outside [0, {self.horizon}]: {t}")

    def clamp(self, t):
        """Clamp t into [eps, T - eps]."""
        return np.clip(t, self.eps, self.horizon - self.eps)

    def alpha(self, t):
        self.check_time(t)
        u = np.clip(np.asarray(t, dtype=float) / self.horizon, 0.0, 1.0)
        if self.family is AlphaFamily.LINEAR:
            out = 1.0 - u
        else:
            out = np.where(u >= 1.0, 0.0, np.cos(0.5 * np.pi * u))
        return out if out.ndim else float(out)

    def alpha_prime(self, t):
        self.check_time(t)
        u = np.clip(np.asarray(t, dtype=float) / self.horizon, 0.0, 1.0)
        if self.family is AlphaFamily.LINEAR:
            out = np.full_like(u, -1.0 / self.horizon)
        else:
            out = -0.5 * np.pi / self.horizon * np.sin(0.5 * np.pi * u)
        return out if out.ndim else float(out)

    def beta(self, t):
        a = self.alpha(t)
        return 1.0 - a

    def rate_scale(self, t):
        """c_t = -alpha'_t / alpha_t, the common factor of every forward rate."""
        a = np.asarray(self.alpha(t), dtype=float)
        if np.any(a <= 0.0):
            raise SingularityError(f"alpha_t = 0 at t = {t}; forward rates diverge")
        out = -np.asarray(self.alpha_prime(t), dtype=float) / a
        return out if out.ndim else float(out)

    def log_alpha_ratio(self, t0: float, t1: float) -> float:
        """log(alpha_{t0} / alpha_{t1}) = integral of c_t over [t0, t1]."""
        a1 = self.alpha(t1)
        if a1 <= 0.0:
            return float("inf")
        return float(np.log(self.alpha(t0)) - np.log(a1))


def make_schedule(
    kind: Union[str, ScheduleKind],
    num_states: int,
    horizon: float = 1.0,
    family: Union[str, AlphaFamily] = AlphaFamily.LINEAR,
    clamp_eps: Optional[float] = None,
) -> Schedule:
    """Build a Schedule from plain values (as read from a config file)."""
    try:
        kind = ScheduleKind(kind)
        family = AlphaFamily(family)
    except ValueError as e:
        raise DomainError(str(e)) from e
    return Schedule(kind, int(num_states), float(horizon), family, clamp_eps)


def _check_state(state, num_states: int) -> None:
    s = np.asarray(state)
    if np.any(s < 0) or np.any(s >= num_states):
        raise DomainError(f"state out of range [0, {num_states}): {state}")


def forward_kernel(schedule: Schedule, t: float, x0: int) -> np.ndarray:
    """q_{t|0}(.|x0) = alpha_t e_{x0} + beta_t pi."""
    _check_state(x0, schedule.num_states)
    a = schedule.alpha(t)
    q = (1.0 - a) * schedule.pi
    q[x0] += a
    return q


@dataclass(frozen=True)
class RateMatrix:
    """
    Time-dependent rate matrix R_t.

    ``generator(t)`` returns the S x S matrix of off-diagonal rates; its
    diagonal is ignored and re-derived so rows always sum to zero.
    ``integrated_exit(i, t0, t1)``, when given, is the closed-form integral of
    the exit rate of state i, used by simulators instead of quadrature.
    """

    num_states: int
    generator: Callable[[float], np.ndarray]
    integrated_exit: Optional[Callable[[int, float, float], float]] = None
    breakpoints: Tuple[float, ...] = field(default=())

    def off_diagonal(self, t: float) -> np.ndarray:
        m = np.array(self.generator(t), dtype=float)
        np.fill_diagonal(m, 0.0)
        if np.any(m < 0.0):
            raise DomainError(f"negative off-diagonal rate at t = {t}")
        return m

    def off_diag(self, t: float, i: int, j: int) -> float:
        if i == j:
            raise DomainError("off_diag is undefined on the diagonal")
        return float(self.off_diagonal(t)[i, j])

    def matrix(self, t: float) -> np.ndarray:
        m = self.off_diagonal(t)
        np.fill_diagonal(m, -m.sum(axis=1))
        return m

    def exit_rate(self, t: float, i: int) -> float:
        return float(self.off_diagonal(t)[i].sum())

    @classmethod
    def constant(cls, matrix) -> "RateMatrix":
        """A time-homogeneous chain with the given off-diagonal rates."""
        m = np.array(matrix, dtype=float)
        np.fill_diagonal(m, 0.0)
        exits = m.sum(axis=1)
        return cls(
            num_states=m.shape[0],
            generator=lambda t: m,
            integrated_exit=lambda i, t0, t1: float(exits[i] * (t1 - t0)),
        )


def rate_from_schedule(schedule: Schedule, t: Optional[float] = None) -> RateMatrix:
    """
    Rate matrix consistent with the schedule's kernel: R_t(i, j) = c_t pi_j.

    For a masked schedule pi is one-hot on m, which gives R_t(i, m) = c_t for
    i != m and no other transitions. If ``t`` is given it is validated
    eagerly (t < T and alpha_t > 0).
    """
    if t is not None:
        schedule.check_time(t)
        if schedule.alpha(t) <= 0.0:
            raise SingularityError(f"alpha_t = 0 at t = {t}; forward rates diverge")
    pi = schedule.pi
    base = np.tile(pi, (schedule.num_states, 1))
    np.fill_diagonal(base, 0.0)

    def generator(s: float) -> np.ndarray:
        return schedule.rate_scale(s) * base

    def integrated_exit(i: int, t0: float, t1: float) -> float:
        return (1.0 - pi[i]) * schedule.log_alpha_ratio(t0, t1)

    return RateMatrix(schedule.num_states, generator, integrated_exit)


@dataclass(frozen=True)
class ExitJump:
    """A rate row split into exit rate and jump distribution."""

    exit_rate: float
    jump_dist: np.ndarray
    source: int
    is_sentinel: bool = False

    @property
    def rates(self) -> np.ndarray:
        return self.exit_rate * self.jump_dist

    @classmethod
    def from_rates(cls, row, source: int) -> "ExitJump":
        row = np.array(row, dtype=float)
        row[source] = 0.0
        lam = float(row.sum())
        if lam > 0.0:
            return cls(lam, row / lam, source)
        return cls(0.0, np.zeros_like(row), source, is_sentinel=True)


def decompose_rate(rate: RateMatrix, t: float, i: int) -> ExitJump:
    _check_state(i, rate.num_states)
    return ExitJump.from_rates(rate.off_diagonal(t)[i], i)


@dataclass(frozen=True)
class ReverseTarget:
    """Reverse-time rates out of one state, per pair and in exit/jump form."""

    exit_rate: float
    jump_dist: np.ndarray
    per_pair: np.ndarray
    source: int

    @classmethod
    def from_per_pair(cls, per_pair, source: int) -> "ReverseTarget":
        per_pair = np.array(per_pair, dtype=float)
        per_pair[source] = 0.0
        ej = ExitJump.from_rates(per_pair, source)
        return cls(ej.exit_rate, ej.jump_dist, per_pair, source)

    def as_exit_jump(self) -> ExitJump:
        return ExitJump.from_rates(self.per_pair, self.source)


def _reverse_target(schedule: Schedule, t: float, q: np.ndarray, i: int) -> ReverseTarget:
    if q[i] <= 0.0:
        raise UnreachableStateError(f"state {i} has zero forward probability at t = {t}")
    in_rates = rate_from_schedule(schedule).off_diagonal(t)[:, i]
    per_pair = in_rates * q / q[i]
    per_pair[i] = 0.0
    return ReverseTarget.from_per_pair(per_pair, i)


def conditional_reverse(schedule: Schedule, t: float, x0: int, i: int) -> ReverseTarget:
    """R_t(i, j | x0) = R_t(j, i) q_{t|0}(j|x0) / q_{t|0}(i|x0)."""
    _check_state(i, schedule.num_states)
    return _reverse_target(schedule, t, forward_kernel(schedule, t, x0), i)


def marginal(schedule: Schedule, p_data, t: float) -> np.ndarray:
    """q_t = alpha_t p_data + beta_t pi."""
    p = np.asarray(p_data, dtype=float)
    a = schedule.alpha(t)
    return a * p + (1.0 - a) * schedule.pi


def marginal_reverse(schedule: Schedule, p_data, t: float, i: int) -> ReverseTarget:
    """R_t(i, j) = R_t(j, i) q_t(j) / q_t(i) with q_t the data-averaged marginal."""
    _check_state(i, schedule.num_states)
    p = np.asarray(p_data, dtype=float)
    if p.shape != (schedule.num_states,) or abs(p.sum() - 1.0) > 1e-10 or np.any(p < 0):
        raise DomainError("p_data must be a probability vector over the state space")
    return _reverse_target(schedule, t, marginal(schedule, p, t), i)


class ConditionalParts(NamedTuple):
    """Batched pieces of the conditional reverse rate out of x_t."""

    in_rates: np.ndarray  # R_t(j, x_t), zero at j = x_t
    ratio: np.ndarray  # q_{t|0}(j|x0) / q_{t|0}(x_t|x0)
    per_pair: np.ndarray  # in_rates * ratio


def conditional_reverse_parts(schedule: Schedule, t, x0, x_t) -> ConditionalParts:
    """
    Vectorized conditional reverse rates for rows (t[n], x0[n], x_t[n]).

    Returns arrays of shape (N, S). Raises UnreachableStateError if any x_t
    has zero probability under its x0.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x0 = np.atleast_1d(np.asarray(x0, dtype=int))
    x_t = np.atleast_1d(np.asarray(x_t, dtype=int))
    t = np.broadcast_to(t, x0.shape)
    _check_state(x0, schedule.num_states)
    _check_state(x_t, schedule.num_states)
    n, s = x0.size, schedule.num_states
    rows = np.arange(n)
    a = np.asarray(schedule.alpha(t), dtype=float)[:, None]
    q = (1.0 - a) * schedule.pi[None, :]
    q[rows, x0] += a[:, 0]
    q_here = q[rows, x_t]
    if np.any(q_here <= 0.0):
        bad = int(np.flatnonzero(q_here <= 0.0)[0])
        raise UnreachableStateError(
            f"x_t = {x_t[bad]} unreachable from x0 = {x0[bad]} at t = {t[bad]}"
        )
    ratio = q / q_here[:, None]
    ratio[rows, x_t] = 0.0
    c = np.asarray(schedule.rate_scale(t), dtype=float)
    in_rates = np.repeat((c * schedule.pi[x_t])[:, None], s, axis=1)
    in_rates[rows, x_t] = 0.0
    return ConditionalParts(in_rates, ratio, in_rates * ratio)


def sample_forward(schedule: Schedule, t, x0, rng: np.random.Generator) -> np.ndarray:
    """
    Draw x_t ~ q_{t|0}(.|x0) independently per position.

    ``x0`` may be a scalar, a sequence (L,) or a batch (N, L) with ``t`` of
    shape (N,). Two uniforms are consumed per position.
    """
    x0 = np.asarray(x0, dtype=int)
    _check_state(x0, schedule.num_states)
    a = np.asarray(schedule.alpha(t), dtype=float)
    if a.ndim == 1 and x0.ndim == 2:
        a = a[:, None]
    keep = rng.random(x0.shape) < a
    cdf = np.cumsum(schedule.pi)
    noise = np.minimum(np.searchsorted(cdf, rng.random(x0.shape), side="right"), schedule.num_states - 1)
    return np.where(keep, x0, noise)
