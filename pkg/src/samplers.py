"""
Reverse-process generation from a two-head model.

Three schemes run the reverse chain from the prior at T down to eps:
  - tau_leaping: per position, jump with probability 1 - exp(-lam tau)
  - euler: one categorical draw from the first-order transition row
  - exact: hazard-inversion simulation of the model's own rates

plus self_correct, which edits a finished sequence one token at a time using
the clean-token distribution recovered from the two heads.

Sample k of a batch always uses the k-th child of SeedSequence(seed) (or of
the caller's generator) and a fixed number of draws per step, so a batch
row equals a single-sample run with that child seed.
"""

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import logsumexp

try:
    from .ctmc_core import ExitJump, Schedule, ScheduleKind
    from .errors import DegenerateRecoveryError, DomainError, SimulationError, UnsupportedScheduleError
    from .path_measure import TIME_TOL, TabulatedHazard
except ImportError:
    from ctmc_core import ExitJump, Schedule, ScheduleKind
    from errors import DegenerateRecoveryError, DomainError, SimulationError, UnsupportedScheduleError
    from path_measure import TIME_TOL, TabulatedHazard


MAX_SEED = 2**64
DRAW_BUDGET = 4_000_000  # uniforms held in memory per chunk


class SamplerScheme(Enum):
    TAU_LEAPING = "tau_leaping"
    EULER = "euler"
    EXACT = "exact"


SCHEME_ALIASES = {"tau": SamplerScheme.TAU_LEAPING, "euler": SamplerScheme.EULER, "exact": SamplerScheme.EXACT}


def parse_scheme(value: Union[str, SamplerScheme]) -> SamplerScheme:
    if isinstance(value, SamplerScheme):
        return value
    if value in SCHEME_ALIASES:
        return SCHEME_ALIASES[value]
    try:
        return SamplerScheme(value)
    except ValueError as e:
        raise DomainError(f"Unknown sampler scheme: {value}") from e


@dataclass(frozen=True)
class SamplerConfig:
    """
    Args:
        steps: Number of reverse steps N (tau = T / N)
        scheme: tau_leaping, euler or exact
        seed: Root seed of the per-sample generators
        clamp_eps: Overrides the schedule's eps when set
        n_samples: Number of independent sequences
        chunk_size: Upper bound on samples advanced together
    """

    steps: int = 256
    scheme: SamplerScheme = SamplerScheme.TAU_LEAPING
    seed: int = 0
    clamp_eps: Optional[float] = None
    n_samples: int = 1
    chunk_size: int = 4096

    def __post_init__(self):
        object.__setattr__(self, "scheme", parse_scheme(self.scheme))
        if self.steps < 1:
            raise DomainError(f"steps must be >= 1, got {self.steps}")
        if not 0 <= self.seed < MAX_SEED:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.n_samples < 1 or self.chunk_size < 1:
            raise DomainError("n_samples and chunk_size must be positive")

    def tau(self, horizon: float) -> float:
        return horizon / self.steps


@dataclass(frozen=True)
class SelfCorrectConfig:
    temperature: float = 0.1
    max_updates: int = 4
    noise_level: float = 0.05

    def __post_init__(self):
        if not self.temperature > 0:
            raise DomainError(f"temperature must be positive, got {self.temperature}")
        if self.max_updates < 1:
            raise DomainError(f"max_updates must be >= 1, got {self.max_updates}")


@dataclass
class SampleBatch:
    """Generated sequences (n_samples, L) with run statistics."""

    samples: np.ndarray
    scheme: SamplerScheme
    steps: int
    seed: int
    num_states: int
    overflow_count: int = 0
    overflow_steps: int = 0

    def sidecar(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "steps": self.steps,
            "seed": self.seed,
            "n_samples": int(self.samples.shape[0]),
            "seq_len": int(self.samples.shape[1]),
            "num_states": self.num_states,
            "overflow_count": self.overflow_count,
            "overflow_steps": self.overflow_steps,
        }

    def to_lines(self) -> str:
        return "".join(" ".join(str(int(v)) for v in row) + "\n" for row in self.samples)

    def save(self, path: Union[str, Path]) -> Tuple[Path, Path]:
        """Write one sequence per line to ``path`` and the sidecar next to it as .json."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_lines(), encoding="utf-8")
        side = path.with_suffix(".json")
        side.write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path, side


def read_samples(path: Union[str, Path]) -> np.ndarray:
    lines = [ln.split() for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    return np.array(lines, dtype=int)


# -- shared plumbing ----------------------------------------------------------

def _generators(config: SamplerConfig, rng: Optional[np.random.Generator]) -> List[np.random.Generator]:
    if rng is not None:
        return rng.spawn(config.n_samples)
    return [np.random.default_rng(c) for c in np.random.SeedSequence(config.seed).spawn(config.n_samples)]


def _initial_noise(schedule: Schedule, seq_len: int, gens: List[np.random.Generator]) -> np.ndarray:
    """x_T from the prior: Uniform(S)^L, or all-mask for a masked schedule."""
    if schedule.kind is ScheduleKind.MASKED:
        return np.full((len(gens), seq_len), schedule.mask_token, dtype=int)
    S = schedule.num_states
    return np.array([np.minimum((g.random(seq_len) * S).astype(int), S - 1) for g in gens], dtype=int).reshape(-1, seq_len)


def _eps(schedule: Schedule, config: SamplerConfig) -> float:
    return schedule.eps if config.clamp_eps is None else config.clamp_eps


def time_grid(schedule: Schedule, config: SamplerConfig) -> np.ndarray:
    """t_n = n tau for n = N, ..., 1, clamped into [eps, T - eps]."""
    eps = _eps(schedule, config)
    tau = config.tau(schedule.horizon)
    return np.clip(np.arange(config.steps, 0, -1) * tau, eps, schedule.horizon - eps)


def _inverse_cdf(r: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(r, axis=-1)
    idx = (cdf < u[..., None] * cdf[..., -1:]).sum(axis=-1)
    return np.minimum(idx, r.shape[-1] - 1)


def _chunks(n: int, size: int):
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


def _check_model(model, schedule: Schedule) -> None:
    if model.num_states != schedule.num_states:
        raise DomainError(f"model has {model.num_states} states, schedule {schedule.num_states}")


def _run_discrete(model, schedule: Schedule, config: SamplerConfig, rng, scheme: SamplerScheme,
                  draws_per_step: int, step_fn) -> SampleBatch:
    _check_model(model, schedule)
    L = model.seq_len
    gens = _generators(config, rng)
    grid = time_grid(schedule, config)
    tau = config.tau(schedule.horizon)
    chunk = max(1, min(config.chunk_size, DRAW_BUDGET // (config.steps * L * draws_per_step)))
    out = np.empty((config.n_samples, L), dtype=int)
    overflow_count = 0
    overflow_at = np.zeros(config.steps, dtype=bool)
    logging.info(f"Sampling {config.n_samples} x {L} tokens with {scheme.value}, N = {config.steps}")
    for sl in _chunks(config.n_samples, chunk):
        part = gens[sl]
        x = _initial_noise(schedule, L, part)
        draws = np.stack([g.random((config.steps, L, draws_per_step)) for g in part])
        for n, t in enumerate(grid):
            lam, r = model.forward_batch(x, t)
            x, overflow = step_fn(x, lam, r, tau, draws[:, n])
            if overflow:
                overflow_count += overflow
                overflow_at[n] = True
        out[sl] = x
    if overflow_count:
        logging.debug(f"Euler overflow: {overflow_count} rescaled rows over {int(overflow_at.sum())} steps")
    return SampleBatch(out, scheme, config.steps, config.seed, schedule.num_states,
                       overflow_count, int(overflow_at.sum()))


def _tau_step(x, lam, r, tau, u):
    # Delta ~ Exp(lam) falls inside the leap iff u > exp(-lam tau); lam = 0 never jumps
    jump = (u[..., 0] > np.exp(-lam * tau)) & (lam > 0.0)
    return np.where(jump, _inverse_cdf(r, u[..., 1]), x), 0


def _euler_step(x, lam, r, tau, u):
    move = lam * tau
    overflow = move > 1.0
    move = np.minimum(move, 1.0)
    stay = 1.0 - move
    u = u[..., 0]
    jump = (u >= stay) & (move > 0.0)
    v = np.where(jump, (u - stay) / np.where(move > 0.0, move, 1.0), 0.0)
    return np.where(jump, _inverse_cdf(r, v), x), int(overflow.sum())


def sample_tau_leaping(model, schedule: Schedule, config: SamplerConfig,
                       rng: Optional[np.random.Generator] = None) -> SampleBatch:
    """
    tau-leaping from the prior at T to eps with N model evaluations per trajectory.

    Positions update simultaneously; at most one jump per position per leap.
    """
    return _run_discrete(model, schedule, config, rng, SamplerScheme.TAU_LEAPING, 2, _tau_step)


def sample_euler(model, schedule: Schedule, config: SamplerConfig,
                 rng: Optional[np.random.Generator] = None) -> SampleBatch:
    """
    First-order scheme: p_j = lam r_j tau off the diagonal, the rest on staying.

    Rows with lam tau > 1 are rescaled to move with probability one and counted
    in ``overflow_count``.
    """
    return _run_discrete(model, schedule, config, rng, SamplerScheme.EULER, 1, _euler_step)


# -- exact reverse simulation -------------------------------------------------

def _exact_single_token(model, schedule: Schedule, config: SamplerConfig, gens) -> np.ndarray:
    """Vectorized hazard inversion for L = 1, in reversed time s = T - t on [eps, T - eps]."""
    S, T = schedule.num_states, schedule.horizon
    eps = _eps(schedule, config)
    lo, hi = eps, T - eps
    states = np.arange(S)

    def exit_rates(s: np.ndarray) -> np.ndarray:
        lam, _ = model.forward_batch(np.tile(states, s.size)[:, None], np.repeat(T - s, S))
        return lam[:, 0].reshape(s.size, S)

    hazard = TabulatedHazard(exit_rates, lo, hi, tuple(T - b for b in model.time_breakpoints()))
    x = _initial_noise(schedule, 1, gens)[:, 0]
    s = np.full(x.size, lo)
    active = np.ones(x.size, dtype=bool)
    while active.any():
        idx = np.flatnonzero(active)
        E = np.array([gens[k].exponential() for k in idx])
        remaining = hazard.cumulative(x[idx], np.full(idx.size, hi)) - hazard.cumulative(x[idx], s[idx])
        jumps = remaining > E
        active[idx[~jumps]] = False
        idx, E = idx[jumps], E[jumps]
        if idx.size == 0:
            break
        s_new = hazard.solve(x[idx], s[idx], E)
        u = np.array([gens[k].random() for k in idx])
        lam, r = model.forward_batch(x[idx][:, None], T - s_new)
        if not np.all(np.isfinite(lam)):
            raise SimulationError("non-finite model exit rate during exact sampling")
        x[idx] = _inverse_cdf(r[:, 0], u)
        s[idx] = s_new
        # a jump landing on the end of the window leaves the sample finished
        active[idx[s_new >= hi - TIME_TOL]] = False
    return x[:, None]


def _exact_sequence(model, schedule: Schedule, config: SamplerConfig, gen: np.random.Generator,
                    x: np.ndarray) -> np.ndarray:
    """Event-by-event simulation for L > 1: total hazard by adaptive quadrature, event by Brent's method."""
    T = schedule.horizon
    eps = _eps(schedule, config)
    lo, hi = eps, T - eps
    points = sorted(T - b for b in model.time_breakpoints() if lo < T - b < hi)
    s = lo
    x = x.copy()

    def total_rate(v: float) -> float:
        lam, _ = model.forward_batch(x[None, :], T - v)
        out = float(lam.sum())
        if not np.isfinite(out):
            raise SimulationError(f"non-finite model exit rate at t = {T - v}")
        return out

    def hazard(v: float) -> float:
        if v <= s:
            return 0.0
        inside = [p for p in points if s < p < v] or None
        return quad(total_rate, s, v, epsabs=1e-12, epsrel=1e-10, limit=200, points=inside)[0]

    while True:
        E = gen.exponential()
        if hazard(hi) <= E:
            return x
        s = max(brentq(lambda v: hazard(v) - E, s, hi, xtol=TIME_TOL), np.nextafter(s, np.inf))
        u = gen.random()
        lam, r = model.forward_batch(x[None, :], T - s)
        flat = (lam[0][:, None] * r[0]).ravel()
        k = int(_inverse_cdf(flat, np.array(u)))
        x[k // schedule.num_states] = k % schedule.num_states


def sample_exact(model, schedule: Schedule, config: SamplerConfig,
                 rng: Optional[np.random.Generator] = None) -> SampleBatch:
    """
    Statistically exact reverse simulation of the model's rates on [eps, T - eps].

    ``config.steps`` is only recorded; no time discretization is involved.
    """
    _check_model(model, schedule)
    gens = _generators(config, rng)
    logging.info(f"Exact reverse simulation of {config.n_samples} sequences")
    if model.seq_len == 1:
        out = _exact_single_token(model, schedule, config, gens)
    else:
        init = _initial_noise(schedule, model.seq_len, gens)
        out = np.stack([_exact_sequence(model, schedule, config, g, x) for g, x in zip(gens, init)])
    return SampleBatch(out, SamplerScheme.EXACT, config.steps, config.seed, schedule.num_states)


SAMPLERS = {
    SamplerScheme.TAU_LEAPING: sample_tau_leaping,
    SamplerScheme.EULER: sample_euler,
    SamplerScheme.EXACT: sample_exact,
}


def sample(model, schedule: Schedule, config: SamplerConfig, rng: Optional[np.random.Generator] = None) -> SampleBatch:
    return SAMPLERS[config.scheme](model, schedule, config, rng)


# -- clean-token recovery and self-correction ---------------------------------

class RecoveredClean(NamedTuple):
    """Model-implied noised distribution q_tilde and recovered clean distribution p0_hat."""

    q_tilde: np.ndarray
    p0_hat: np.ndarray
    state: int

    def implied_exit_jump(self, schedule: Schedule, t: float) -> ExitJump:
        """Exit rate and jump distribution that map back onto this q_tilde."""
        S, i = schedule.num_states, self.state
        qi = self.q_tilde[i]
        lam = schedule.rate_scale(t) * (1.0 - qi) / (S * qi)
        if lam <= 0.0:
            return ExitJump(0.0, np.zeros(S), i, is_sentinel=True)
        r = self.q_tilde / (1.0 - qi)
        r[i] = 0.0
        return ExitJump(float(lam), r, i)


def _recover_arrays(schedule: Schedule, t: float, states: np.ndarray, lam: np.ndarray, r: np.ndarray):
    """Vectorized recovery over positions; returns (q_tilde, p0_hat, degenerate mask)."""
    if schedule.kind is not ScheduleKind.UNIFORM:
        raise UnsupportedScheduleError("clean-token recovery needs a uniform reference distribution")
    S = schedule.num_states
    c = schedule.rate_scale(t)
    a = schedule.alpha(t)
    qi = 1.0 / (1.0 + S * lam / c)
    q = (1.0 - qi)[..., None] * r
    np.put_along_axis(q, states[..., None], qi[..., None], axis=-1)
    num = np.maximum((q - (1.0 - a) / S) / a, 0.0)
    total = num.sum(axis=-1, keepdims=True)
    degenerate = total[..., 0] <= 0.0
    p0 = np.divide(num, total, out=np.zeros_like(num), where=total > 0.0)
    return q, p0, degenerate


def recover_clean(model_out: ExitJump, schedule: Schedule, t: float, i: int) -> RecoveredClean:
    """
    Clean-token distribution implied by one head output at state i:

        q_tilde(i) = 1 / (1 + S lam / c_t),  q_tilde(j) = (1 - q_tilde(i)) r(j|i)
        p0_hat = Normalize([(q_tilde - beta_t pi) / alpha_t]_+)

    with c_t = -alpha'_t / alpha_t (c_t = 1 / alpha_t for the linear schedule).
    """
    if model_out.source != i:
        raise DomainError(f"head output belongs to state {model_out.source}, not {i}")
    q, p0, degenerate = _recover_arrays(
        schedule, t, np.array([i]), np.array([model_out.exit_rate]), np.asarray(model_out.jump_dist, dtype=float)[None, :]
    )
    if degenerate[0]:
        raise DegenerateRecoveryError(f"every clean-token probability clipped to zero at state {i}, t = {t}")
    return RecoveredClean(q[0], p0[0], int(i))


def tempered(p: np.ndarray, temperature: float) -> np.ndarray:
    """Temp(p)_j proportional to p_j^(1/temperature), computed in log space."""
    with np.errstate(divide="ignore"):
        logits = np.log(p) / temperature
    return np.exp(logits - logsumexp(logits, axis=-1, keepdims=True))


def self_correct(model, schedule: Schedule, x_t, config: SelfCorrectConfig, rng: np.random.Generator,
                 t: Optional[float] = None) -> np.ndarray:
    """
    Up to ``max_updates`` single-token edits of x_t at noise level t.

    Each iteration proposes a token per position from the tempered recovered
    clean distribution (L uniforms), collects the positions where the proposal
    disagrees with the current token, and rewrites the one whose proposal has
    the highest recovered probability. Stops early when nothing disagrees.
    """
    t = config.noise_level if t is None else t
    x = np.array(x_t, dtype=int)
    for it in range(config.max_updates):
        head = model.forward(x, t)
        _, p0, degenerate = _recover_arrays(schedule, t, x, head.exit_rates, head.jump_dists)
        if degenerate.any():
            logging.warning(f"Degenerate clean-token recovery at positions {np.flatnonzero(degenerate).tolist()}")
        u = rng.random(x.size)
        proposal = x.copy()
        ok = ~degenerate
        if ok.any():
            proposal[ok] = _inverse_cdf(tempered(p0[ok], config.temperature), u[ok])
        candidates = np.flatnonzero(proposal != x)
        if candidates.size == 0:
            break
        confidence = p0[candidates, proposal[candidates]]
        pos = int(candidates[np.argmax(confidence)])
        logging.debug(f"Self-correction {it + 1}: position {pos} {x[pos]} -> {proposal[pos]}")
        x[pos] = proposal[pos]
    return x

