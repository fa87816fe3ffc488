"""
Path-space tools: trajectories, exact path densities, Radon-Nikodym ratios,
exact (hazard-inversion) Gillespie simulation and the Campbell-Mecke check.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

try:
    from .ctmc_core import ExitJump, RateMatrix, Schedule, decompose_rate, forward_kernel, rate_from_schedule
    from .errors import DomainError, SimulationError
    from .numerics import gauss_legendre_nodes, panel_edges
except ImportError:
    from ctmc_core import ExitJump, RateMatrix, Schedule, decompose_rate, forward_kernel, rate_from_schedule
    from errors import DomainError, SimulationError
    from numerics import gauss_legendre_nodes, panel_edges


TIME_TOL = 1e-9
SURVIVAL_RTOL = 1e-10


@dataclass(frozen=True)
class Path:
    """
    Piecewise-constant trajectory on [start, horizon].

    ``jumps`` holds (time, post_jump_state) pairs in increasing time order.
    """

    initial_state: int
    jumps: Tuple[Tuple[float, int], ...]
    horizon: float
    start: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "jumps", tuple((float(t), int(s)) for t, s in self.jumps))
        prev_t, prev_s = self.start, int(self.initial_state)
        for t, s in self.jumps:
            if not prev_t < t < self.horizon:
                raise DomainError(f"jump time {t} not increasing inside ({self.start}, {self.horizon})")
            if s == prev_s:
                raise DomainError(f"self-jump at t = {t}")
            prev_t, prev_s = t, s

    @property
    def n_jumps(self) -> int:
        return len(self.jumps)

    @property
    def states(self) -> List[int]:
        return [int(self.initial_state)] + [s for _, s in self.jumps]

    @property
    def final_state(self) -> int:
        return self.states[-1]

    def state_at(self, t: float) -> int:
        state = int(self.initial_state)
        for tk, s in self.jumps:
            if tk > t:
                break
            state = s
        return state

    def holding_intervals(self) -> List[Tuple[float, float, int]]:
        """(begin, end, state) for every constant stretch of the path."""
        times = [self.start] + [t for t, _ in self.jumps] + [self.horizon]
        return [(times[k], times[k + 1], s) for k, s in enumerate(self.states)]

    def split(self, u: float) -> Tuple["Path", "Path"]:
        if not self.start < u < self.horizon:
            raise DomainError(f"split point {u} outside ({self.start}, {self.horizon})")
        if any(t == u for t, _ in self.jumps):
            raise DomainError("cannot split exactly at a jump time")
        head = [(t, s) for t, s in self.jumps if t < u]
        tail = [(t, s) for t, s in self.jumps if t > u]
        return (Path(self.initial_state, tuple(head), u, self.start),
                Path(self.state_at(u), tuple(tail), self.horizon, u))

    def concatenate(self, other: "Path") -> "Path":
        if other.start != self.horizon or other.initial_state != self.final_state:
            raise DomainError("paths do not join")
        return Path(self.initial_state, self.jumps + other.jumps, other.horizon, self.start)

    def time_reversed(self) -> "Path":
        """Same trajectory read backwards, s = start + horizon - t."""
        pivot = self.start + self.horizon
        states = self.states
        jumps = tuple((pivot - t, states[k]) for k, (t, _) in reversed(list(enumerate(self.jumps))))
        return Path(self.final_state, jumps, self.horizon, self.start)

    def to_record(self) -> str:
        """Text record ``x0 T n t1 s1 t2 s2 ...`` with 12 significant digits."""
        if self.start != 0.0:
            raise DomainError("only paths starting at t = 0 serialize to records")
        parts = [str(self.initial_state), format(self.horizon, ".12g"), str(self.n_jumps)]
        for t, s in self.jumps:
            parts.extend([format(t, ".12g"), str(s)])
        return " ".join(parts)

    @classmethod
    def from_record(cls, line: str) -> "Path":
        tokens = line.split()
        if len(tokens) < 3:
            raise DomainError(f"malformed path record: {line!r}")
        n = int(tokens[2])
        if len(tokens) != 3 + 2 * n:
            raise DomainError(f"path record announces {n} jumps but holds {(len(tokens) - 3) // 2}")
        jumps = tuple((float(tokens[3 + 2 * k]), int(tokens[4 + 2 * k])) for k in range(n))
        return cls(int(tokens[0]), jumps, float(tokens[1]))


# -- densities --------------------------------------------------------------

def _points_inside(breakpoints: Sequence[float], a: float, b: float) -> Optional[List[float]]:
    inside = [p for p in breakpoints if a < p < b]
    return inside or None


def _integrate(fn: Callable[[float], float], a: float, b: float, breakpoints: Sequence[float] = ()) -> float:
    if b <= a:
        return 0.0
    value, _ = quad(fn, a, b, epsabs=1e-14, epsrel=SURVIVAL_RTOL, limit=200,
                    points=_points_inside(breakpoints, a, b))
    return value


def log_path_density(rate: RateMatrix, path: Path) -> float:
    """
    log density of a path under the CTMC with rates ``rate``:

        sum_k log R_{t_k}(x_{k-1}, x_k) - int lam_t(X_t) dt

    Returns -inf (with a warning) if a realized jump has zero rate.
    """
    states = path.states
    log_jumps = 0.0
    for k, (t, s) in enumerate(path.jumps):
        r = rate.off_diag(t, states[k], s)
        if r <= 0.0:
            logging.warning(f"Zero rate for realized jump {states[k]} -> {s} at t = {t}")
            return float("-inf")
        log_jumps += np.log(r)
    survival = sum(
        _integrate(lambda u, x=x: rate.exit_rate(u, x), a, b, rate.breakpoints)
        for a, b, x in path.holding_intervals()
    )
    return float(log_jumps - survival)


def model_rate_matrix(model, reverse_pivot: Optional[float] = None) -> RateMatrix:
    """
    RateMatrix view of a single-token model's rates R_theta.

    With ``reverse_pivot`` the matrix is read in reversed time, R(s) = R_theta(pivot - s).
    """
    S = model.num_states

    def generator(s: float) -> np.ndarray:
        t = s if reverse_pivot is None else reverse_pivot - s
        lam, r = model.forward_batch(np.arange(S)[:, None], t)
        return lam[:, 0, None] * r[:, 0, :]

    bps = model.time_breakpoints()
    if reverse_pivot is not None:
        bps = tuple(sorted(reverse_pivot - b for b in bps))
    return RateMatrix(S, generator, breakpoints=tuple(bps))


def log_rn_derivative(fwd_rate: RateMatrix, model, prior, path: Path, include_prior: bool = True) -> float:
    """
    log dP_theta / dQ along a forward path, the model's chain running backwards from ``prior``:

        log prior(x_n) + sum_k log[R_theta(x_k, x_{k-1}) / R(x_{k-1}, x_k)]
            + int [lam_t(X_t) - lam_theta_t(X_t)] dt
    """
    prior = np.asarray(prior, dtype=float)
    states = path.states
    total = 0.0
    if include_prior:
        if prior[path.final_state] <= 0.0:
            raise DomainError(f"prior has no mass on the path's end state {path.final_state}")
        total += float(np.log(prior[path.final_state]))
    model_rates = model_rate_matrix(model)
    for k, (t, s) in enumerate(path.jumps):
        back = model_rates.off_diag(t, s, states[k])
        fwd = fwd_rate.off_diag(t, states[k], s)
        if back <= 0.0 or fwd <= 0.0:
            logging.warning(f"Zero rate on jump {states[k]} -> {s} at t = {t}")
            return float("-inf") if back <= 0.0 else float("inf")
        total += np.log(back) - np.log(fwd)
    bps = tuple(fwd_rate.breakpoints) + tuple(model.time_breakpoints())
    for a, b, x in path.holding_intervals():
        total += _integrate(lambda u, x=x: fwd_rate.exit_rate(u, x) - model_rates.exit_rate(u, x), a, b, bps)
    return float(total)


# -- rate providers ---------------------------------------------------------

class ForwardRateProvider:
    """(t, i) -> ExitJump from a RateMatrix, with its closed-form hazard when available."""

    def __init__(self, rate: RateMatrix):
        self.rate = rate
        self.num_states = rate.num_states
        if rate.integrated_exit is not None:
            self.integrated_exit_rate = rate.integrated_exit

    def __call__(self, t: float, i: int) -> ExitJump:
        return decompose_rate(self.rate, t, i)


class ModelRateProvider:
    """(t, i) -> ExitJump read from a single-token model."""

    def __init__(self, model):
        self.model = model
        self.num_states = model.num_states

    def __call__(self, t: float, i: int) -> ExitJump:
        return self.model.forward([i], t).per_position[0]


class TimeReversedProvider:
    """Wraps a provider so that it is queried at t = pivot - s."""

    def __init__(self, provider, pivot: float):
        self.provider = provider
        self.pivot = pivot
        self.num_states = provider.num_states
        inner = getattr(provider, "integrated_exit_rate", None)
        if inner is not None:
            self.integrated_exit_rate = lambda i, s0, s1: inner(i, pivot - s1, pivot - s0)

    def __call__(self, s: float, i: int) -> ExitJump:
        return self.provider(self.pivot - s, i)


class TabulatedHazard:
    """
    Cumulative exit hazards H_i(t) = int_lo^t lam_u(i) du of every state,
    tabulated on graded Gauss-Legendre panels and interpolated monotonically.

    Args:
        exit_rates: Vectorized map from times (K,) to exit rates (K, S)
        lo, hi: Time range covered
        breakpoints: Times where the rates may jump
        n_uniform: Number of uniform base panels
    """

    def __init__(self, exit_rates: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                 breakpoints: Sequence[float] = (), n_uniform: int = 256, points: int = 8):
        self.lo, self.hi = float(lo), float(hi)
        edges = panel_edges(lo, hi, breakpoints, n_uniform=n_uniform, grade_lo=16, grade_hi=16)
        x, w = np.polynomial.legendre.leggauss(points)
        a, b = edges[:-1, None], edges[1:, None]
        half = 0.5 * (b - a)
        nodes = (0.5 * (a + b) + half * x[None, :]).ravel()
        rates = np.asarray(exit_rates(nodes), dtype=float)
        if not np.all(np.isfinite(rates)):
            raise SimulationError("non-finite exit rate while tabulating hazards")
        panel = (half * w[None, :]).ravel()[:, None] * rates
        per_panel = panel.reshape(edges.size - 1, points, -1).sum(axis=1)
        cumulative = np.vstack([np.zeros((1, per_panel.shape[1])), np.cumsum(per_panel, axis=0)])
        self.num_states = cumulative.shape[1]
        self._interp = PchipInterpolator(edges, cumulative, axis=0, extrapolate=False)

    def cumulative(self, states: np.ndarray, t: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=int)
        t = np.clip(np.asarray(t, dtype=float), self.lo, self.hi)
        values = self._interp(t)
        return np.take_along_axis(values.reshape(t.size, -1), states.reshape(-1, 1), axis=1).reshape(states.shape)

    def integrated_exit_rate(self, i: int, t0: float, t1: float) -> float:
        h = self.cumulative(np.array([i, i]), np.array([t0, t1]))
        return float(h[1] - h[0])

    def solve(self, states: np.ndarray, t0: np.ndarray, targets: np.ndarray, tol: float = TIME_TOL) -> np.ndarray:
        """
        Bisection for t in (t0, hi] with H(t) - H(t0) = target, elementwise.

        Callers only pass rows whose remaining hazard exceeds the target.
        """
        lo = np.asarray(t0, dtype=float).copy()
        hi = np.full_like(lo, self.hi)
        goal = self.cumulative(states, lo) + targets
        while np.any(hi - lo > tol):
            mid = 0.5 * (lo + hi)
            below = self.cumulative(states, mid) < goal
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return hi


# -- simulation -------------------------------------------------------------

def _draw_destination(jump_dist: np.ndarray, u: float) -> int:
    cdf = np.cumsum(jump_dist)
    return int(min(np.searchsorted(cdf, u * cdf[-1], side="right"), jump_dist.size - 1))


def gillespie_sample(rate_provider, x_init: int, t_start: float, t_end: float, rng: np.random.Generator) -> Path:
    """
    Exact simulation of a time-inhomogeneous CTMC on [t_start, t_end].

    The holding time solves int_{t}^{t_next} lam_s ds = E with E ~ Exp(1),
    found by Brent's method to 1e-9 in time; the destination is drawn from
    the jump distribution at t_next. Each jump consumes one exponential and
    one uniform.
    """
    if not t_start < t_end:
        raise DomainError(f"need t_start < t_end, got {t_start} >= {t_end}")
    integrated = getattr(rate_provider, "integrated_exit_rate", None)
    t, x = float(t_start), int(x_init)
    jumps = []
    while True:
        E = rng.exponential()

        def hazard(s: float, x=x, t=t) -> float:
            if integrated is not None:
                return integrated(x, t, s)
            return _integrate(lambda u: rate_provider(u, x).exit_rate, t, s)

        remaining = hazard(t_end)
        if not np.isfinite(remaining):
            raise SimulationError(f"non-finite hazard for state {x} on [{t}, {t_end}]")
        if remaining <= E:
            break
        t_next = brentq(lambda s: hazard(s) - E, t, t_end, xtol=TIME_TOL)
        t_next = max(t_next, np.nextafter(t, np.inf))
        ej = rate_provider(t_next, x)
        if not np.isfinite(ej.exit_rate):
            raise SimulationError(f"non-finite exit rate at t = {t_next}")
        u = rng.random()
        if ej.is_sentinel:
            # no jump at a zero-rate instant; keep holding from there
            logging.debug(f"zero-rate event for state {x} at t = {t_next}")
            t = t_next
            continue
        x = _draw_destination(ej.jump_dist, u)
        t = t_next
        jumps.append((t, x))
    return Path(int(x_init), tuple(jumps), t_end, t_start)


def sample_paths(rate_provider, x_init: int, t_start: float, t_end: float,
                 seed: int, n_paths: int, workers: int = 1) -> List[Path]:
    """
    Generate paths with per-path generators from SeedSequence(seed).spawn(n_paths).

    Output order and values do not depend on ``workers``.
    """
    children = np.random.SeedSequence(seed).spawn(n_paths)

    def one(child: np.random.SeedSequence) -> Path:
        return gillespie_sample(rate_provider, x_init, t_start, t_end, np.random.default_rng(child))

    if workers <= 1:
        return [one(c) for c in children]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, children))


class CampbellMeckeResult(NamedTuple):
    mc_estimate: float
    analytic: float
    standard_error: float


def campbell_mecke_check(rate: RateMatrix, schedule: Schedule, x0: int, f: Callable[[float, int, int], float],
                         n_paths: int, rng: np.random.Generator, t_end: Optional[float] = None,
                         quad_points: int = 32) -> CampbellMeckeResult:
    """
    Compare E[sum over jumps of f(t_k, x_{k-1}, x_k)] from simulated paths with
    int_0^{t_end} sum_i q_{t|0}(i|x0) sum_{j != i} R_t(i, j) f(t, i, j) dt.
    """
    if t_end is None:
        t_end = schedule.horizon - schedule.eps
    provider = ForwardRateProvider(rate)
    sums = np.empty(n_paths)
    for n in range(n_paths):
        path = gillespie_sample(provider, x0, 0.0, t_end, rng)
        states = path.states
        sums[n] = sum(f(t, states[k], s) for k, (t, s) in enumerate(path.jumps))
    nodes, weights = gauss_legendre_nodes(0.0, t_end, quad_points, rate.breakpoints)
    analytic = 0.0
    for t, w in zip(nodes, weights):
        q = forward_kernel(schedule, t, x0)
        R = rate.off_diagonal(t)
        for i, j in zip(*np.nonzero(R > 0)):
            analytic += w * q[i] * R[i, j] * f(t, int(i), int(j))
    stderr = float(sums.std(ddof=1) / np.sqrt(n_paths)) if n_paths > 1 else float("nan")
    return CampbellMeckeResult(float(sums.mean()), float(analytic), stderr)


def path_elbo_estimate(schedule: Schedule, model, x0: int, n_paths: int,
                       rng: np.random.Generator) -> Tuple[float, float]:
    """
    Monte Carlo value of -E_{Q_x0}[log dP_theta/dQ] over forward paths on [0, T - eps],
    with the model's reverse chain started from pi at T - eps. Returns (mean, standard error).
    """
    t_end = schedule.horizon - schedule.eps
    rate = rate_from_schedule(schedule)
    provider = ForwardRateProvider(rate)
    values = np.array([
        -log_rn_derivative(rate, model, schedule.pi, gillespie_sample(provider, x0, 0.0, t_end, rng))
        for _ in range(n_paths)
    ])
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(n_paths))
