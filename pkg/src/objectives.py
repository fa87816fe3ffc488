"""
Divergences and training losses for two-head reverse models.

Row-level quantities (one source state, all destinations) are computed by
vectorized helpers shared by the single-sample losses, the minibatch
objective used in training, and the exact enumeration routines.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, NamedTuple, Tuple, Union

import numpy as np
from scipy.special import xlogy

try:
    from .ctmc_core import (ExitJump, ReverseTarget, Schedule, ScheduleKind,
                            conditional_reverse_parts, forward_kernel, marginal,
                            sample_forward)
    from .errors import DomainError, UnsupportedScheduleError
    from .model import HeadGradient
    from .numerics import DEFAULT_QUAD_POINTS, gauss_legendre_nodes, tree_sum
except ImportError:
    from ctmc_core import (ExitJump, ReverseTarget, Schedule, ScheduleKind,
                           conditional_reverse_parts, forward_kernel, marginal,
                           sample_forward)
    from errors import DomainError, UnsupportedScheduleError
    from model import HeadGradient
    from numerics import DEFAULT_QUAD_POINTS, gauss_legendre_nodes, tree_sum


class ObjectiveKind(Enum):
    COND_STABLE = "cond_stable"
    KL = "kl"
    CONDITIONAL = "conditional"


@dataclass
class LossBreakdown:
    """An objective value split into Poisson, direction and constant parts."""

    poisson_term: float
    direction_term: float
    constant_term: float
    total: float

    def to_dict(self) -> Dict[str, float]:
        return {
            "poisson": self.poisson_term,
            "direction": self.direction_term,
            "constant": self.constant_term,
            "total": self.total,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Dict[str, float]) -> "LossBreakdown":
        return cls(data["poisson"], data["direction"], data["constant"], data["total"])

    def scaled(self, factor: float) -> "LossBreakdown":
        return LossBreakdown(self.poisson_term * factor, self.direction_term * factor,
                             self.constant_term * factor, self.total * factor)


@dataclass
class GapReport:
    """Exact L_KL, marginal reverse KL and their theta-free gap."""

    l_kl_value: float
    marginal_kl_value: float
    c_gap: float
    entropy_constant: float
    delta_integral: float
    t_nodes: np.ndarray = field(repr=False)
    delta: np.ndarray = field(repr=False)

    @property
    def per_pair_delta(self) -> Dict[Tuple[float, int, int], float]:
        n_states = self.delta.shape[1]
        return {
            (float(t), i, j): float(self.delta[k, i, j])
            for k, t in enumerate(self.t_nodes)
            for i in range(n_states)
            for j in range(n_states)
            if i != j
        }


# -- scalar divergences -----------------------------------------------------

def _check_rate(lam_true: float, lam_model: float) -> None:
    if not lam_model > 0:
        raise DomainError(f"model rate must be positive, got {lam_model}")
    if lam_true < 0:
        raise DomainError(f"true rate must be nonnegative, got {lam_true}")


def poisson_kl(lam_true: float, lam_model: float) -> float:
    """KL between Poisson processes: lam log(lam / lam_model) - lam + lam_model."""
    _check_rate(lam_true, lam_model)
    return float(xlogy(lam_true, lam_true) - xlogy(lam_true, lam_model) - lam_true + lam_model)


def bregman_density(r: float, c: float) -> float:
    """f(r, c) = r log(r / c) - r + c, the Bregman divergence of x log x."""
    _check_rate(r, c)
    return float(xlogy(r, r) - xlogy(r, c) - r + c)


def categorical_kl(r_true, r_model) -> float:
    """KL(r_true || r_model); +inf when r_model misses mass of r_true."""
    p = np.asarray(r_true, dtype=float)
    q = np.asarray(r_model, dtype=float)
    bad = np.flatnonzero((p > 0) & (q <= 0))
    if bad.size:
        logging.warning(f"categorical_kl: model has no mass on index {int(bad[0])}")
        return float("inf")
    return float(np.sum(xlogy(p, p) - xlogy(p, np.where(p > 0, q, 1.0))))


def _bregman(p: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Elementwise f(p, c) with f(0, c) = c and f(p > 0, 0) = inf."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = xlogy(p, p) - xlogy(p, c) - p + c
    return np.where(p > 0, out, c)


def decompose_row_kl(target: ReverseTarget, model_out: ExitJump) -> LossBreakdown:
    """Sum of f over a row, next to its Poisson and categorical parts computed separately."""
    lam_hat, lam = target.exit_rate, model_out.exit_rate
    if lam <= 0 and lam_hat > 0:
        raise DomainError("model exit rate must be positive where the target jumps")
    total = tree_sum(_bregman(target.per_pair, model_out.rates))
    if lam <= 0:
        return LossBreakdown(0.0, 0.0, 0.0, total)
    poisson = poisson_kl(lam_hat, lam)
    direction = lam_hat * categorical_kl(target.jump_dist, model_out.jump_dist) if lam_hat > 0 else 0.0
    return LossBreakdown(poisson, direction, 0.0, total)


# -- row losses shared by single-sample and batch objectives ----------------

class RowTerms(NamedTuple):
    total: np.ndarray
    poisson: np.ndarray
    direction: np.ndarray
    g_lam: np.ndarray
    g_r: np.ndarray


def _row_terms(kind: ObjectiveKind, in_rates: np.ndarray, ratio: np.ndarray,
               lam: np.ndarray, r: np.ndarray) -> RowTerms:
    """
    Loss values and head gradients for rows of shape (n,) / (n, S).

    ``in_rates[n, j]`` is R_t(j, x_t) and ``ratio[n, j]`` is
    q(j|x0) / q(x_t|x0); both are zero at j = x_t.
    """
    P = in_rates * ratio
    lam_hat = P.sum(axis=1)
    R_model = lam[:, None] * r
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind is ObjectiveKind.KL:
            total = _bregman(P, R_model).sum(axis=1)
        elif kind is ObjectiveKind.CONDITIONAL:
            total = -xlogy(P, R_model).sum(axis=1) - lam_hat + lam
        else:
            coupled = in_rates > 0
            log_term = np.where(coupled, xlogy(P, R_model) - xlogy(P, np.where(coupled, in_rates, 1.0)), 0.0)
            k_term = np.where(coupled, in_rates * (xlogy(ratio, ratio) - ratio), 0.0)
            total = R_model.sum(axis=1) - log_term.sum(axis=1) + k_term.sum(axis=1)
        poisson = _bregman(lam_hat, lam)
        g_lam = 1.0 - np.divide(lam_hat, lam, out=np.zeros_like(lam), where=lam > 0)
        g_r = -np.divide(P, r, out=np.zeros_like(P), where=P > 0)
        g_r = np.where((P > 0) & (r <= 0), -np.inf, g_r)
        if kind is not ObjectiveKind.CONDITIONAL:
            # the extra lam term is constant across destinations and drops out of the softmax
            g_r = g_r + lam[:, None] * (r > 0)
    return RowTerms(total, poisson, total - poisson, g_lam, g_r)


def _warn_unsupported(r: np.ndarray, P: np.ndarray) -> None:
    bad = np.argwhere((P > 0) & (r <= 0))
    if bad.size:
        row, j = (int(v) for v in bad[0])
        logging.warning(f"Model assigns zero rate to target-supported pair (position {row}, destination {j})")


def _single_sample(kind: ObjectiveKind, schedule: Schedule, model, x0, t: float, x_t):
    x0 = np.atleast_1d(np.asarray(x0, dtype=int))
    x_t = np.atleast_1d(np.asarray(x_t, dtype=int))
    if x0.shape != x_t.shape:
        raise DomainError("x0 and x_t must have the same length")
    parts = conditional_reverse_parts(schedule, np.full(x0.size, float(t)), x0, x_t)
    head = model.forward(x_t, t)
    terms = _row_terms(kind, parts.in_rates, parts.ratio, head.exit_rates, head.jump_dists)
    if not np.all(np.isfinite(terms.total)):
        _warn_unsupported(head.jump_dists, parts.per_pair)
    breakdown = LossBreakdown(tree_sum(terms.poisson), tree_sum(terms.direction), 0.0, tree_sum(terms.total))
    return breakdown, terms, x_t


def loss_conditional(schedule: Schedule, model, x0, t: float, x_t) -> LossBreakdown:
    """-sum_j R(x_t, j | x0) log R_theta(x_t, j) - lam_hat + lam_theta, summed over positions."""
    return _single_sample(ObjectiveKind.CONDITIONAL, schedule, model, x0, t, x_t)[0]


def loss_kl(schedule: Schedule, model, x0, t: float, x_t) -> LossBreakdown:
    """sum_j f(R(x_t, j | x0), R_theta(x_t, j)), summed over positions."""
    return _single_sample(ObjectiveKind.KL, schedule, model, x0, t, x_t)[0]


def loss_cond_stable(schedule: Schedule, model, x0, t: float, x_t) -> LossBreakdown:
    """
    L_KL rewritten without the large cancellation near t = T:

        sum_j lam r_j - sum_j R(j,i) rho_j log(lam r_j / R(j,i)) + sum_j R(j,i) K(rho_j)

    with rho_j = q(j|x0) / q(i|x0) and K(a) = a (log a - 1). Pairs with
    R(j, i) = 0 only enter the first sum.
    """
    return _single_sample(ObjectiveKind.COND_STABLE, schedule, model, x0, t, x_t)[0]


def loss_gradient(kind: Union[str, ObjectiveKind], schedule: Schedule, model, x0, t: float, x_t) -> np.ndarray:
    """Analytic parameter gradient of a single-sample loss."""
    _, terms, x_t = _single_sample(ObjectiveKind(kind), schedule, model, x0, t, x_t)
    return model.backward(x_t, t, HeadGradient(terms.g_lam, terms.g_r))


LOSS_FUNCTIONS = {
    ObjectiveKind.COND_STABLE: loss_cond_stable,
    ObjectiveKind.KL: loss_kl,
    ObjectiveKind.CONDITIONAL: loss_conditional,
}


def mdlm_loss(masked_schedule: Schedule, x0: int, x_t: int, x_theta, t: float) -> float:
    """Masked-diffusion cross-entropy (alpha'_t / (1 - alpha_t)) log x_theta[x0], zero unless x_t is the mask."""
    if masked_schedule.kind is not ScheduleKind.MASKED:
        raise UnsupportedScheduleError("mdlm_loss needs a masked schedule")
    probs = np.asarray(x_theta, dtype=float)
    if probs.shape != (masked_schedule.num_states - 1,):
        raise DomainError(f"x_theta must cover the {masked_schedule.num_states - 1} data tokens")
    if abs(probs.sum() - 1.0) > 1e-10 or np.any(probs < 0):
        raise DomainError("x_theta must be a probability vector")
    if not 0 <= x0 < masked_schedule.num_states - 1:
        raise DomainError(f"x0 must be a data token, got {x0}")
    if x_t != masked_schedule.mask_token:
        return 0.0
    if probs[x0] <= 0.0:
        logging.warning(f"mdlm_loss: x_theta has no mass on the clean token {x0}")
        return float("inf")
    a = masked_schedule.alpha(t)
    return float(masked_schedule.alpha_prime(t) / (1.0 - a) * np.log(probs[x0]))


# -- minibatch objective ----------------------------------------------------

class BatchResult(NamedTuple):
    breakdown: LossBreakdown
    grad: np.ndarray
    per_sample: np.ndarray


def window_length(schedule: Schedule) -> float:
    """Length of [eps, T - eps]; losses are reported integrated over it."""
    return schedule.horizon - 2.0 * schedule.eps


def batch_objective(kind: Union[str, ObjectiveKind], schedule: Schedule, model,
                    x0: np.ndarray, t: np.ndarray, x_t: np.ndarray) -> BatchResult:
    """
    Minibatch estimate of an integrated objective and its parameter gradient.

    Args:
        kind: Which loss to use
        schedule: Forward schedule
        model: A TwoHeadModel
        x0: Clean sequences, shape (N, L)
        t: Times drawn uniformly from [eps, T - eps], shape (N,)
        x_t: Noised sequences, shape (N, L)

    Returns:
        BatchResult with the batch-mean breakdown (scaled by the window
        length), the matching gradient and per-sample totals
    """
    kind = ObjectiveKind(kind)
    x0 = np.atleast_2d(np.asarray(x0, dtype=int))
    x_t = np.atleast_2d(np.asarray(x_t, dtype=int))
    t = np.asarray(t, dtype=float)
    n, L = x0.shape
    parts = conditional_reverse_parts(schedule, np.repeat(t, L), x0.ravel(), x_t.ravel())
    lam, r = model.forward_batch(x_t, t)
    terms = _row_terms(kind, parts.in_rates, parts.ratio, lam.ravel(), r.reshape(n * L, -1))
    scale = window_length(schedule)
    per_sample = terms.total.reshape(n, L).sum(axis=1) * scale
    breakdown = LossBreakdown(
        tree_sum(terms.poisson) * scale / n,
        tree_sum(terms.direction) * scale / n,
        0.0,
        tree_sum(per_sample) / n,
    )
    grad = model.backward_batch(
        x_t, t,
        terms.g_lam.reshape(n, L) * (scale / n),
        terms.g_r.reshape(n, L, -1) * (scale / n),
    )
    return BatchResult(breakdown, grad, per_sample)


# -- exact enumeration over single-token data -------------------------------

class _Enumeration(NamedTuple):
    q_joint: np.ndarray  # (K, M, S): p(x0) q_{t|0}(i|x0)
    q_t: np.ndarray  # (K, S)
    P: np.ndarray  # (K, M, S, S): conditional reverse rates
    P_hat: np.ndarray  # (K, S, S): marginal reverse rates
    posterior: np.ndarray  # (K, M, S): p(x0 | x_t = i)


def _check_p_data(schedule: Schedule, p_data) -> np.ndarray:
    p = np.asarray(p_data, dtype=float)
    if p.shape != (schedule.num_states,) or abs(p.sum() - 1.0) > 1e-10 or np.any(p < 0):
        raise DomainError("p_data must be a probability vector over the state space")
    return p


def _check_single_token(model) -> None:
    if model.seq_len != 1:
        raise DomainError("exact enumeration needs a single-token model (seq_len = 1)")


def _enumerate(schedule: Schedule, p: np.ndarray, nodes: np.ndarray) -> _Enumeration:
    support = np.flatnonzero(p > 0)
    S = schedule.num_states
    a = np.asarray(schedule.alpha(nodes), dtype=float)[:, None, None]
    onehot = np.eye(S)[support]
    qc = (1.0 - a) * schedule.pi[None, None, :] + a * onehot[None, :, :]
    c = np.asarray(schedule.rate_scale(nodes), dtype=float)
    in_rates = c[:, None, None] * np.broadcast_to(schedule.pi[None, :, None], (nodes.size, S, S))
    in_rates = in_rates * (1.0 - np.eye(S))[None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(qc[..., :, None] > 0, qc[..., None, :] / qc[..., :, None], 0.0)
    ratio = ratio * (1.0 - np.eye(S))
    P = in_rates[:, None] * ratio
    q_joint = p[support][None, :, None] * qc
    q_t = q_joint.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        posterior = np.where(q_t[:, None, :] > 0, q_joint / q_t[:, None, :], 0.0)
    P_hat = (posterior[..., None] * P).sum(axis=1)
    return _Enumeration(q_joint, q_t, P, P_hat, posterior)


def _model_rates(model, nodes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    S, K = model.num_states, nodes.size
    X = np.tile(np.arange(S), K)[:, None]
    lam, r = model.forward_batch(X, np.repeat(nodes, S))
    return lam.reshape(K, S), r.reshape(K, S, S)


def _window_nodes(schedule: Schedule, model, quad_points: int, lo: float, hi: float):
    if quad_points < 8:
        raise DomainError(f"quad_points must be at least 8, got {quad_points}")
    return gauss_legendre_nodes(lo, hi, quad_points, model.time_breakpoints(), grade_lo=12, grade_hi=12)


def compute_gap(schedule: Schedule, p_data, model, quad_points: int = DEFAULT_QUAD_POINTS) -> GapReport:
    """
    Exact L_KL, marginal reverse KL and C_gap on [eps, T - eps].

    Enumerates every (x0, x_t) pair; cost is O(S^2 * nodes * |supp p_data|).
    """
    _check_single_token(model)
    p = _check_p_data(schedule, p_data)
    nodes, weights = _window_nodes(schedule, model, quad_points, schedule.eps, schedule.horizon - schedule.eps)
    e = _enumerate(schedule, p, nodes)
    lam, r = _model_rates(model, nodes)
    R_model = lam[..., None] * r
    w = weights[:, None]

    f_cond = _bregman(e.P, R_model[:, None]).sum(axis=-1)
    l_kl = tree_sum(weights[:, None, None] * np.where(e.q_joint > 0, e.q_joint * f_cond, 0.0))
    f_marg = _bregman(e.P_hat, R_model).sum(axis=-1)
    marginal_kl = tree_sum(w * np.where(e.q_t > 0, e.q_t * f_marg, 0.0))

    delta = (e.posterior[..., None] * xlogy(e.P, e.P)).sum(axis=1) - xlogy(e.P_hat, e.P_hat)
    if delta.min() < -1e-12:
        logging.warning(f"Jensen gap term below zero: {delta.min():.3e}")
    delta_integral = tree_sum(w * e.q_t * delta.sum(axis=-1))
    entropy = tree_sum(w * e.q_t * (e.P_hat.sum(axis=-1) - xlogy(e.P_hat, e.P_hat).sum(axis=-1)))
    return GapReport(l_kl, marginal_kl, l_kl - marginal_kl, entropy, delta_integral, nodes, delta)


def exact_objective_gradient(schedule: Schedule, p_data, model, quad_points: int = DEFAULT_QUAD_POINTS,
                             target: str = "l_kl") -> np.ndarray:
    """
    Exact parameter gradient of L_KL (``target="l_kl"``) or of the marginal
    reverse KL (``target="marginal"``) on [eps, T - eps].
    """
    _check_single_token(model)
    p = _check_p_data(schedule, p_data)
    nodes, weights = _window_nodes(schedule, model, quad_points, schedule.eps, schedule.horizon - schedule.eps)
    e = _enumerate(schedule, p, nodes)
    lam, r = _model_rates(model, nodes)
    w = weights[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        if target == "l_kl":
            wq = w[:, None] * e.q_joint
            lam_hat = e.P.sum(axis=-1)
            g_lam = (wq * (1.0 - lam_hat / lam[:, None])).sum(axis=1)
            ratio = np.where(r[:, None] > 0, e.P / r[:, None], 0.0)
            g_r = (wq[..., None] * (lam[:, None, :, None] * (r[:, None] > 0) - ratio)).sum(axis=1)
        elif target == "marginal":
            wq = w * e.q_t
            g_lam = wq * (1.0 - e.P_hat.sum(axis=-1) / lam)
            ratio = np.where(r > 0, e.P_hat / r, 0.0)
            g_r = wq[..., None] * (lam[..., None] * (r > 0) - ratio)
        else:
            raise DomainError(f"Unknown gradient target: {target}")
    S, K = model.num_states, nodes.size
    X = np.tile(np.arange(S), K)[:, None]
    return model.backward_batch(X, np.repeat(nodes, S), g_lam.reshape(K * S, 1), g_r.reshape(K * S, 1, S))


def mc_marginal_loss_samples(schedule: Schedule, p_data, model, n_samples: int,
                             rng: np.random.Generator) -> np.ndarray:
    """
    Per-sample integrated values of lam_theta - lam_hat log lam_theta - sum_j R_hat_j log r_theta_j.

    t ~ U(eps, T - eps), x0 ~ p_data, x_t ~ q_{t|0}; targets are the exact
    marginal reverse rates.
    """
    _check_single_token(model)
    p = _check_p_data(schedule, p_data)
    t = rng.uniform(schedule.eps, schedule.horizon - schedule.eps, size=n_samples)
    x0 = rng.choice(schedule.num_states, p=p, size=n_samples)
    x_t = sample_forward(schedule, t, x0, rng)
    rows = np.arange(n_samples)
    a = np.asarray(schedule.alpha(t), dtype=float)[:, None]
    q = a * p[None, :] + (1.0 - a) * schedule.pi[None, :]
    c = np.asarray(schedule.rate_scale(t), dtype=float)
    P_hat = (c * schedule.pi[x_t])[:, None] * q / q[rows, x_t][:, None]
    P_hat[rows, x_t] = 0.0
    lam, r = model.forward_batch(x_t[:, None], t)
    R_model = lam[:, 0, None] * r[:, 0, :]
    with np.errstate(divide="ignore"):
        values = (R_model - xlogy(P_hat, R_model)).sum(axis=1)
    return values * window_length(schedule)


def mc_marginal_loss(schedule: Schedule, p_data, model, n_samples: int, rng: np.random.Generator) -> float:
    """Monte Carlo estimate of the marginal objective; its mean is marginal_kl_value + entropy_constant."""
    return tree_sum(mc_marginal_loss_samples(schedule, p_data, model, n_samples, rng)) / n_samples


# -- evidence bounds --------------------------------------------------------

def _forward_rates(schedule: Schedule, nodes: np.ndarray) -> np.ndarray:
    c = np.asarray(schedule.rate_scale(nodes), dtype=float)
    base = np.tile(schedule.pi, (schedule.num_states, 1)) * (1.0 - np.eye(schedule.num_states))
    return c[:, None, None] * base[None]


def conditional_elbo(schedule: Schedule, model, x0: int, quad_points: int = DEFAULT_QUAD_POINTS) -> float:
    """
    Upper bound on -log p_theta(x0) for a single-token model:

        -E_{q_{T'|0}}[log pi(X)] + int_0^{T'} sum_i q_{t|0}(i|x0) l_t(i) dt
        l_t(i) = sum_j R(i,j) log(R(i,j) / R_theta(j,i)) - R(i,j) + R_theta(i,j)

    with T' = T - eps and the prior pi placed at T'.
    """
    _check_single_token(model)
    t_end = schedule.horizon - schedule.eps
    q_end = forward_kernel(schedule, t_end, x0)
    with np.errstate(divide="ignore"):
        prior_term = -float(np.sum(xlogy(q_end, schedule.pi)))
    nodes, weights = _window_nodes(schedule, model, quad_points, 0.0, t_end)
    R = _forward_rates(schedule, nodes)
    lam, r = _model_rates(model, nodes)
    R_model = lam[..., None] * r
    with np.errstate(divide="ignore", invalid="ignore"):
        ell = (xlogy(R, R) - xlogy(R, np.swapaxes(R_model, 1, 2)) - R + R_model).sum(axis=-1)
    a = np.asarray(schedule.alpha(nodes), dtype=float)[:, None]
    q = (1.0 - a) * schedule.pi[None, :]
    q[:, x0] += a[:, 0]
    return prior_term + tree_sum(weights[:, None] * q * ell)


def data_elbo(schedule: Schedule, p_data, model, quad_points: int = DEFAULT_QUAD_POINTS) -> float:
    """E_{x0 ~ p_data} of conditional_elbo."""
    p = _check_p_data(schedule, p_data)
    return tree_sum([p[x] * conditional_elbo(schedule, model, int(x), quad_points) for x in np.flatnonzero(p > 0)])


def marginal_reverse_kl(schedule: Schedule, p_data, model, quad_points: int = DEFAULT_QUAD_POINTS) -> float:
    """
    Path-space KL between the true reverse process and the model's:

        KL(q_{T'} || pi) + int_0^{T'} sum_i q_t(i) sum_j f(R_hat(i,j), R_theta(i,j)) dt

    data_elbo exceeds it by the theta-free entropy of p_data.
    """
    _check_single_token(model)
    p = _check_p_data(schedule, p_data)
    t_end = schedule.horizon - schedule.eps
    q_end = marginal(schedule, p, t_end)
    with np.errstate(divide="ignore"):
        kl_end = float(np.sum(xlogy(q_end, q_end) - xlogy(q_end, schedule.pi)))
    nodes, weights = _window_nodes(schedule, model, quad_points, 0.0, t_end)
    e = _enumerate(schedule, p, nodes)
    lam, r = _model_rates(model, nodes)
    f_marg = _bregman(e.P_hat, lam[..., None] * r).sum(axis=-1)
    return kl_end + tree_sum(weights[:, None] * np.where(e.q_t > 0, e.q_t * f_marg, 0.0))
