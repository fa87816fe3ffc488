"""
Two-headed reverse model: (x_t, t) -> (exit rate, jump distribution) per position.

Two variants share one flat parameter vector interface:
  - tabular: one (log-rate, logits) entry per (time bucket, state); context free
  - mlp: two tanh layers over the one-hot sequence and sinusoidal time features

Exit rates are exp(raw) and jump distributions a softmax over the S - 1
states other than the current one, so positivity and zero self-mass hold by
construction. Gradients are analytic.

Every model-like object in the package (TwoHeadModel, MaskedAdapterModel,
oracle.ExactReverseModel) exposes ``num_states``, ``seq_len``, ``horizon``,
``forward``, ``forward_batch`` and ``time_breakpoints``.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

try:
    from .ctmc_core import ExitJump, Schedule, ScheduleKind
    from .errors import ConfigError, DomainError, UnsupportedScheduleError
except ImportError:
    from ctmc_core import ExitJump, Schedule, ScheduleKind
    from errors import ConfigError, DomainError, UnsupportedScheduleError


INIT_RATE_BAND = (0.5, 2.0)
CHECKPOINT_MAGIC = "neural-ctmc-checkpoint"


class ModelVariant(Enum):
    TABULAR = "tabular"
    MLP = "mlp"


@dataclass
class HeadOutput:
    """Per-position exit rates (L,) and jump distributions (L, S)."""

    states: np.ndarray
    exit_rates: np.ndarray
    jump_dists: np.ndarray

    @property
    def per_position(self) -> List[ExitJump]:
        out = []
        for state, lam, r in zip(self.states, self.exit_rates, self.jump_dists):
            out.append(ExitJump(float(lam), r, int(state), is_sentinel=bool(lam == 0.0)))
        return out

    @property
    def rates(self) -> np.ndarray:
        return self.exit_rates[:, None] * self.jump_dists


@dataclass
class HeadGradient:
    """Gradient of a scalar loss with respect to a HeadOutput."""

    exit_rates: np.ndarray
    jump_dists: np.ndarray


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _destinations(states: np.ndarray, num_states: int) -> np.ndarray:
    """Map compressed non-self index k to destination j = k + (k >= state)."""
    k = np.arange(num_states - 1)
    return k + (k >= states[..., None])


def _as_batch(X, t) -> Tuple[np.ndarray, np.ndarray]:
    X = np.atleast_2d(np.asarray(X, dtype=int))
    t = np.broadcast_to(np.asarray(t, dtype=float), (X.shape[0],)).copy()
    return X, t


class TwoHeadModel:
    """
    Parametric reverse-rate model.

    Args:
        variant: "tabular" or "mlp"
        num_states: State-space size S
        seq_len: Sequence length L
        horizon: Final time T of the schedule the model is trained against
        time_buckets: Number of uniform time buckets (tabular)
        hidden_width: Width of both hidden layers (mlp)
        time_features: Even number of sinusoidal time features (mlp)
        seed: Seed of the initialization
    """

    def __init__(
        self,
        variant: Union[str, ModelVariant],
        num_states: int,
        seq_len: int = 1,
        horizon: float = 1.0,
        time_buckets: int = 64,
        hidden_width: int = 64,
        time_features: int = 8,
        seed: int = 0,
    ):
        try:
            self.variant = ModelVariant(variant)
        except ValueError as e:
            raise ConfigError(f"Unknown model variant: {variant}") from e
        if num_states < 2 or seq_len < 1 or horizon <= 0:
            raise DomainError("need num_states >= 2, seq_len >= 1, horizon > 0")
        if time_features % 2:
            raise ConfigError("time_features must be even")
        self.num_states = int(num_states)
        self.seq_len = int(seq_len)
        self.horizon = float(horizon)
        self.time_buckets = int(time_buckets)
        self.hidden_width = int(hidden_width)
        self.time_features = int(time_features)
        self.seed = int(seed)
        self._layout = self._build_layout()
        self._params = np.zeros(sum(int(np.prod(shape)) for _, shape in self._layout.values()))
        self._initialize(np.random.default_rng(self.seed))

    # -- parameter layout ---------------------------------------------------

    def _build_layout(self) -> Dict[str, Tuple[slice, Tuple[int, ...]]]:
        S, L = self.num_states, self.seq_len
        if self.variant is ModelVariant.TABULAR:
            B = self.time_buckets
            shapes = [("log_rate", (B, S)), ("logits", (B, S, S - 1))]
        else:
            H, D = self.hidden_width, self.time_features
            shapes = [
                ("W1", (L * S + D, H)), ("b1", (H,)),
                ("W2", (H, H)), ("b2", (H,)),
                ("W_rate", (H, L)), ("b_rate", (L,)),
                ("W_jump", (H, L * S)), ("b_jump", (L * S,)),
            ]
        layout, offset = {}, 0
        for name, shape in shapes:
            size = int(np.prod(shape))
            layout[name] = (slice(offset, offset + size), shape)
            offset += size
        return layout

    def _view(self, name: str, flat: Optional[np.ndarray] = None) -> np.ndarray:
        sl, shape = self._layout[name]
        source = self._params if flat is None else flat
        return source[sl].reshape(shape)

    def _initialize(self, rng: np.random.Generator) -> None:
        lo, hi = np.log(INIT_RATE_BAND[0]), np.log(INIT_RATE_BAND[1])
        if self.variant is ModelVariant.TABULAR:
            self._view("log_rate")[...] = rng.uniform(lo, hi, size=self._layout["log_rate"][1])
            return
        fan_in = self.seq_len * self.num_states + self.time_features
        self._view("W1")[...] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=self._layout["W1"][1])
        self._view("W2")[...] = rng.normal(0.0, 1.0 / np.sqrt(self.hidden_width), size=self._layout["W2"][1])
        self._view("b_rate")[...] = rng.uniform(lo, hi, size=self.seq_len)

    @property
    def params(self) -> np.ndarray:
        return self._params

    @params.setter
    def params(self, value) -> None:
        value = np.array(value, dtype=float)
        if value.shape != self._params.shape:
            raise DomainError(f"expected {self._params.size} parameters, got {value.size}")
        self._params = value

    @property
    def n_params(self) -> int:
        return self._params.size

    def time_breakpoints(self) -> Tuple[float, ...]:
        """Times where the model output is discontinuous."""
        if self.variant is ModelVariant.TABULAR:
            edges = np.arange(1, self.time_buckets) * self.horizon / self.time_buckets
            return tuple(float(e) for e in edges)
        return ()

    def bucket_of(self, t) -> np.ndarray:
        u = np.asarray(t, dtype=float) / self.horizon
        return np.clip((u * self.time_buckets).astype(int), 0, self.time_buckets - 1)

    def _check_inputs(self, X: np.ndarray, t: np.ndarray) -> None:
        if X.shape[1] != self.seq_len:
            raise DomainError(f"expected sequences of length {self.seq_len}, got {X.shape[1]}")
        if np.any(X < 0) or np.any(X >= self.num_states):
            raise DomainError(f"state out of range [0, {self.num_states})")
        slack = 1e-12 * self.horizon
        if np.any(~np.isfinite(t)) or np.any(t < -slack) or np.any(t > self.horizon + slack):
            raise DomainError(f"time outside [0, {self.horizon}]")

    # -- forward ------------------------------------------------------------

    def _time_features(self, t: np.ndarray) -> np.ndarray:
        u = t / self.horizon
        k = np.arange(1, self.time_features // 2 + 1)
        angle = np.pi * u[:, None] * k[None, :]
        return np.concatenate([np.sin(angle), np.cos(angle)], axis=1)

    def _mlp_hidden(self, X: np.ndarray, t: np.ndarray, flat=None):
        n = X.shape[0]
        onehot = np.zeros((n, self.seq_len, self.num_states))
        np.put_along_axis(onehot, X[..., None], 1.0, axis=-1)
        F = np.concatenate([onehot.reshape(n, -1), self._time_features(t)], axis=1)
        h1 = np.tanh(F @ self._view("W1", flat) + self._view("b1", flat))
        h2 = np.tanh(h1 @ self._view("W2", flat) + self._view("b2", flat))
        return F, h1, h2

    def _raw_heads(self, X: np.ndarray, t: np.ndarray):
        """Raw log-rates (N, L) and compressed logits (N, L, S - 1)."""
        if self.variant is ModelVariant.TABULAR:
            b = np.broadcast_to(self.bucket_of(t)[:, None], X.shape)
            return self._view("log_rate")[b, X], self._view("logits")[b, X], None
        F, h1, h2 = self._mlp_hidden(X, t)
        a = h2 @ self._view("W_rate") + self._view("b_rate")
        z = (h2 @ self._view("W_jump") + self._view("b_jump")).reshape(X.shape[0], self.seq_len, self.num_states)
        dest = _destinations(X, self.num_states)
        return a, np.take_along_axis(z, dest, axis=-1), (F, h1, h2)

    def forward_batch(self, X, t) -> Tuple[np.ndarray, np.ndarray]:
        """
        Evaluate a batch.

        Args:
            X: States, shape (N, L)
            t: Times, scalar or shape (N,)

        Returns:
            (exit_rates (N, L), jump_dists (N, L, S))
        """
        X, t = _as_batch(X, t)
        self._check_inputs(X, t)
        a, z, _ = self._raw_heads(X, t)
        r = np.zeros(X.shape + (self.num_states,))
        np.put_along_axis(r, _destinations(X, self.num_states), _softmax(z), axis=-1)
        return np.exp(a), r

    def forward(self, x_t, t: float) -> HeadOutput:
        x = np.atleast_1d(np.asarray(x_t, dtype=int))
        lam, r = self.forward_batch(x[None, :], t)
        return HeadOutput(x, lam[0], r[0])

    def forward_position(self, x_t, t: float, position: int) -> ExitJump:
        """Head output at one position; the tabular variant only reads that token."""
        x = np.atleast_1d(np.asarray(x_t, dtype=int))
        if self.variant is ModelVariant.TABULAR:
            b = int(self.bucket_of(float(t)))
            i = int(x[position])
            r = np.zeros(self.num_states)
            r[_destinations(np.array(i), self.num_states)] = _softmax(self._view("logits")[b, i])
            return ExitJump(float(np.exp(self._view("log_rate")[b, i])), r, i)
        return self.forward(x, t).per_position[position]

    # -- backward -----------------------------------------------------------

    def backward_batch(self, X, t, g_lam, g_r) -> np.ndarray:
        """
        Gradient of sum(g_lam * exit_rates) + sum(g_r * jump_dists) w.r.t. params.

        Entries of ``g_r`` at the self state are ignored.
        """
        X, t = _as_batch(X, t)
        self._check_inputs(X, t)
        g_lam = np.asarray(g_lam, dtype=float).reshape(X.shape)
        g_r = np.asarray(g_r, dtype=float).reshape(X.shape + (self.num_states,))
        a, z, cache = self._raw_heads(X, t)
        dest = _destinations(X, self.num_states)
        rc = _softmax(z)
        gc = np.take_along_axis(g_r, dest, axis=-1)
        da = g_lam * np.exp(a)
        dz = rc * (gc - (rc * gc).sum(axis=-1, keepdims=True))
        grad = np.zeros_like(self._params)

        if self.variant is ModelVariant.TABULAR:
            b = np.broadcast_to(self.bucket_of(t)[:, None], X.shape)
            np.add.at(self._view("log_rate", grad), (b, X), da)
            np.add.at(self._view("logits", grad), (b, X), dz)
            return grad

        F, h1, h2 = cache
        n = X.shape[0]
        dz_full = np.zeros(X.shape + (self.num_states,))
        np.put_along_axis(dz_full, dest, dz, axis=-1)
        dz_flat = dz_full.reshape(n, -1)
        self._view("W_rate", grad)[...] = h2.T @ da
        self._view("b_rate", grad)[...] = da.sum(axis=0)
        self._view("W_jump", grad)[...] = h2.T @ dz_flat
        self._view("b_jump", grad)[...] = dz_flat.sum(axis=0)
        dh2 = da @ self._view("W_rate").T + dz_flat @ self._view("W_jump").T
        dpre2 = dh2 * (1.0 - h2 ** 2)
        self._view("W2", grad)[...] = h1.T @ dpre2
        self._view("b2", grad)[...] = dpre2.sum(axis=0)
        dpre1 = (dpre2 @ self._view("W2").T) * (1.0 - h1 ** 2)
        self._view("W1", grad)[...] = F.T @ dpre1
        self._view("b1", grad)[...] = dpre1.sum(axis=0)
        return grad

    def backward(self, x_t, t: float, upstream: HeadGradient) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x_t, dtype=int))
        return self.backward_batch(
            x[None, :], t,
            np.asarray(upstream.exit_rates, dtype=float)[None, :],
            np.asarray(upstream.jump_dists, dtype=float)[None, :, :],
        )

    # -- tabular helpers ----------------------------------------------------

    def set_head(self, bucket: int, state: int, exit_rate: float, jump_dist) -> None:
        """Write an exact (exit rate, jump distribution) into one tabular cell."""
        if self.variant is not ModelVariant.TABULAR:
            raise DomainError("set_head is only defined for the tabular variant")
        if exit_rate <= 0:
            raise DomainError("exit rate must be positive")
        r = np.asarray(jump_dist, dtype=float)
        dest = _destinations(np.array(state), self.num_states)
        with np.errstate(divide="ignore"):
            self._view("logits")[bucket, state] = np.log(r[dest])
        self._view("log_rate")[bucket, state] = np.log(exit_rate)

    def bucket_center(self, bucket: int) -> float:
        return (bucket + 0.5) * self.horizon / self.time_buckets

    # -- checkpoints --------------------------------------------------------

    def header(self) -> str:
        fields = {
            "variant": self.variant.value,
            "num_states": self.num_states,
            "seq_len": self.seq_len,
            "time_buckets": self.time_buckets,
            "hidden_width": self.hidden_width,
            "time_features": self.time_features,
            "horizon": repr(self.horizon),
            "seed": self.seed,
            "n_params": self.n_params,
        }
        return CHECKPOINT_MAGIC + " " + " ".join(f"{k}={v}" for k, v in fields.items())

    def to_text(self) -> str:
        lines = [self.header()]
        lines.extend(format(float(p), ".17g") for p in self._params)
        return "\n".join(lines) + "\n"

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_text(), encoding="utf-8")
        logging.info(f"✓ Checkpoint saved to: {path}")
        return path

    @classmethod
    def from_text(cls, text: str) -> "TwoHeadModel":
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines or not lines[0].startswith(CHECKPOINT_MAGIC):
            raise ConfigError("not a checkpoint: missing header line")
        header = dict(token.split("=", 1) for token in lines[0].split()[1:])
        model = cls(
            header["variant"],
            int(header["num_states"]),
            seq_len=int(header["seq_len"]),
            horizon=float(header["horizon"]),
            time_buckets=int(header["time_buckets"]),
            hidden_width=int(header["hidden_width"]),
            time_features=int(header["time_features"]),
            seed=int(header.get("seed", 0)),
        )
        values = np.array([float(v) for v in lines[1:]])
        if values.size != int(header["n_params"]) or values.size != model.n_params:
            raise ConfigError(f"checkpoint holds {values.size} parameters, header says {header['n_params']}")
        model.params = values
        return model

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TwoHeadModel":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Checkpoint not found: {path}")
        return cls.from_text(path.read_text(encoding="utf-8"))


class MaskedAdapterModel:
    """
    Two-head view of a clean-token predictor under a masked schedule.

    At the mask state the exit rate is the schedule constant
    -alpha'_t / (1 - alpha_t) and the jump distribution is the predictor's
    output; every other state is absorbing (zero-rate sentinel).
    """

    def __init__(self, x_theta_net: Callable[[np.ndarray, float], np.ndarray], schedule: Schedule, seq_len: int = 1):
        if schedule.kind is not ScheduleKind.MASKED:
            raise UnsupportedScheduleError("masked_adapter needs a masked schedule")
        self.net = x_theta_net
        self.schedule = schedule
        self.num_states = schedule.num_states
        self.seq_len = seq_len
        self.horizon = schedule.horizon

    def mask_rate(self, t: float) -> float:
        a = self.schedule.alpha(t)
        if a >= 1.0:
            return 0.0
        return -self.schedule.alpha_prime(t) / (1.0 - a)

    def forward(self, x_t, t: float) -> HeadOutput:
        x = np.atleast_1d(np.asarray(x_t, dtype=int))
        m = self.schedule.mask_token
        lam = np.zeros(x.size)
        r = np.zeros((x.size, self.num_states))
        masked = x == m
        if masked.any():
            probs = np.atleast_2d(np.asarray(self.net(x, t), dtype=float))
            if probs.shape[0] == 1 and x.size > 1:
                probs = np.repeat(probs, x.size, axis=0)
            lam[masked] = self.mask_rate(t)
            r[masked, : self.num_states - 1] = probs[masked]
        return HeadOutput(x, lam, r)

    def forward_batch(self, X, t) -> Tuple[np.ndarray, np.ndarray]:
        X, t = _as_batch(X, t)
        outs = [self.forward(x, tt) for x, tt in zip(X, t)]
        return np.stack([o.exit_rates for o in outs]), np.stack([o.jump_dists for o in outs])

    def time_breakpoints(self) -> Tuple[float, ...]:
        return ()


def masked_adapter(x_theta_net: Callable[[np.ndarray, float], np.ndarray], masked_schedule: Schedule, seq_len: int = 1) -> MaskedAdapterModel:
    return MaskedAdapterModel(x_theta_net, masked_schedule, seq_len)


class MomentumSGD:
    """
    Gradient descent with heavy-ball momentum: v <- mu v + g, theta <- theta - eta v.

    ``lr_schedule="linear_decay"`` scales eta linearly from its initial value
    to zero over ``total_steps``.
    """

    def __init__(self, learning_rate: float = 1e-2, momentum: float = 0.9,
                 lr_schedule: str = "constant", total_steps: Optional[int] = None):
        if lr_schedule not in ("constant", "linear_decay"):
            raise ConfigError(f"Unknown lr_schedule: {lr_schedule}")
        if lr_schedule == "linear_decay" and not total_steps:
            raise ConfigError("linear_decay needs total_steps")
        self.learning_rate = float(learning_rate)
        self.momentum = float(momentum)
        self.lr_schedule = lr_schedule
        self.total_steps = total_steps
        self.velocity: Optional[np.ndarray] = None
        self.step_count = 0

    def current_lr(self) -> float:
        if self.lr_schedule == "constant":
            return self.learning_rate
        return self.learning_rate * max(0.0, 1.0 - self.step_count / self.total_steps)

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.velocity is None:
            self.velocity = np.zeros_like(params)
        lr = self.current_lr()
        self.velocity = self.momentum * self.velocity + grad
        self.step_count += 1
        if lr == 0.0:
            return params
        return params - lr * self.velocity
