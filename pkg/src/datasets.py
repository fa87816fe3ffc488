"""
Toy datasets small enough for exact oracles.

- categorical_iid: independent tokens from a fixed categorical
- markov_sequences: order-1 Markov chains over the data vocabulary
- grid_image: 8x8 binary pictures (L = 64, S = 2) drawn from a few templates
  with independent pixel flips
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple

import numpy as np

try:
    from .ctmc_core import Schedule, ScheduleKind
    from .errors import ConfigError, DomainError
except ImportError:
    from ctmc_core import Schedule, ScheduleKind
    from errors import ConfigError, DomainError


MAX_VOCAB = 16
MAX_MARKOV_LEN = 32
MAX_ENUMERATED = 65_536
GRID_SIDE = 8


class DatasetKind(Enum):
    CATEGORICAL_IID = "categorical_iid"
    MARKOV_SEQUENCES = "markov_sequences"
    GRID_IMAGE = "grid_image"


def grid_templates() -> np.ndarray:
    """Five 8x8 binary templates, flattened to (5, 64)."""
    n = GRID_SIDE
    canvas = np.zeros((5, n, n), dtype=int)
    canvas[0, 3:5, :] = 1  # horizontal bar
    canvas[1, :, 3:5] = 1  # vertical bar
    canvas[2, 3:5, :] = 1
    canvas[2, :, 3:5] = 1  # cross
    canvas[3, [0, -1], :] = 1
    canvas[3, :, [0, -1]] = 1  # frame
    canvas[4][np.eye(n, dtype=bool) | np.fliplr(np.eye(n, dtype=bool))] = 1  # diagonals
    return canvas.reshape(5, n * n)


@dataclass
class ToyDataset:
    """
    A seeded data source, with the exact distribution when it is enumerable.

    ``vocab_size`` excludes the mask token of a masked schedule, so data
    tokens are always ``range(vocab_size)``.
    """

    kind: DatasetKind
    num_states: int
    seq_len: int
    vocab_size: int
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not 2 <= self.vocab_size <= min(MAX_VOCAB, self.num_states):
            raise ConfigError(f"vocabulary size must lie in [2, {MAX_VOCAB}], got {self.vocab_size}")
        if self.kind is DatasetKind.MARKOV_SEQUENCES and self.seq_len > MAX_MARKOV_LEN:
            raise ConfigError(f"markov sequences are limited to length {MAX_MARKOV_LEN}")
        if self.kind is DatasetKind.GRID_IMAGE and (self.seq_len != GRID_SIDE ** 2 or self.vocab_size != 2):
            raise ConfigError("grid images need seq_len = 64 and two data tokens")

    # -- parameters ---------------------------------------------------------

    @property
    def probs(self) -> np.ndarray:
        p = self.params.get("probs")
        if p is None:
            return np.full(self.vocab_size, 1.0 / self.vocab_size)
        p = np.asarray(p, dtype=float)
        if p.shape != (self.vocab_size,) or abs(p.sum() - 1.0) > 1e-10 or np.any(p < 0):
            raise ConfigError(f"dataset.probs must be a probability vector of length {self.vocab_size}")
        return p

    @property
    def initial(self) -> np.ndarray:
        p = self.params.get("initial")
        return self.probs if p is None else np.asarray(p, dtype=float)

    @property
    def transition(self) -> np.ndarray:
        m = self.params.get("transition")
        if m is not None:
            m = np.asarray(m, dtype=float)
            if m.shape != (self.vocab_size,) * 2 or np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-10):
                raise ConfigError("dataset.transition must be a row-stochastic matrix over the vocabulary")
            return m
        stay = float(self.params.get("stay_prob", 0.8))
        move = (1.0 - stay) / (self.vocab_size - 1)
        return np.full((self.vocab_size, self.vocab_size), move) + np.eye(self.vocab_size) * (stay - move)

    # -- exact distribution -------------------------------------------------

    @property
    def enumerable(self) -> bool:
        if self.kind is DatasetKind.GRID_IMAGE:
            return False
        if self.kind is DatasetKind.MARKOV_SEQUENCES:
            return self.seq_len <= 8 and self.vocab_size <= 4
        return self.vocab_size ** self.seq_len <= MAX_ENUMERATED

    def support(self) -> Tuple[np.ndarray, np.ndarray]:
        """All sequences with positive probability (M, L) and their probabilities (M,)."""
        if not self.enumerable:
            raise DomainError(f"{self.kind.value} with L = {self.seq_len} is not enumerable")
        seqs = np.array(list(itertools.product(range(self.vocab_size), repeat=self.seq_len)), dtype=int)
        if self.kind is DatasetKind.CATEGORICAL_IID:
            probs = np.prod(self.probs[seqs], axis=1)
        else:
            probs = self.initial[seqs[:, 0]] * np.prod(self.transition[seqs[:, :-1], seqs[:, 1:]], axis=1)
        keep = probs > 0
        return seqs[keep], probs[keep] / probs[keep].sum()

    def p_data(self) -> np.ndarray:
        """Distribution over the S states of a single-token dataset (zero on the mask)."""
        if self.seq_len != 1:
            raise DomainError("p_data over states is only defined for single-token data")
        p = np.zeros(self.num_states)
        support, probs = self.support()
        p[support[:, 0]] = probs
        return p

    # -- sampling -----------------------------------------------------------

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n sequences (n, L); one block of uniforms per call."""
        if self.kind is DatasetKind.CATEGORICAL_IID:
            cdf = np.cumsum(self.probs)
            u = rng.random((n, self.seq_len))
            return np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), self.vocab_size - 1)
        if self.kind is DatasetKind.MARKOV_SEQUENCES:
            u = rng.random((n, self.seq_len))
            out = np.empty((n, self.seq_len), dtype=int)
            cdf0 = np.cumsum(self.initial)
            out[:, 0] = np.minimum(np.searchsorted(cdf0, u[:, 0] * cdf0[-1], side="right"), self.vocab_size - 1)
            cdf = np.cumsum(self.transition, axis=1)
            for k in range(1, self.seq_len):
                rows = cdf[out[:, k - 1]]
                out[:, k] = np.minimum((rows < u[:, k, None] * rows[:, -1:]).sum(axis=1), self.vocab_size - 1)
            return out
        templates = grid_templates()
        pick = np.minimum((rng.random(n) * len(templates)).astype(int), len(templates) - 1)
        flips = rng.random((n, self.seq_len)) < float(self.params.get("flip_prob", 0.05))
        return np.where(flips, 1 - templates[pick], templates[pick])


def make_dataset(section: Dict[str, Any], schedule: Schedule, seq_len: int) -> ToyDataset:
    """Build the dataset of an experiment; masked schedules keep the last state for the mask."""
    try:
        kind = DatasetKind(section.get("kind", "categorical_iid"))
    except ValueError as e:
        raise ConfigError(f"Unknown dataset kind: {section.get('kind')}") from e
    vocab = schedule.num_states - 1 if schedule.kind is ScheduleKind.MASKED else schedule.num_states
    params = {k: v for k, v in section.items() if k != "kind" and v is not None}
    dataset = ToyDataset(kind, schedule.num_states, seq_len, vocab, params)
    logging.debug(f"Dataset {kind.value}: vocab {vocab}, L = {seq_len}, enumerable = {dataset.enumerable}")
    return dataset
