"""
Small numerical helpers: composite Gauss-Legendre rules, deterministic
reductions and distances between distributions.
"""

from functools import lru_cache
from typing import Iterable, Tuple

import numpy as np


DEFAULT_QUAD_POINTS = 64


@lru_cache(maxsize=32)
def _legendre(points: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(points)
    return nodes, weights


def panel_edges(
    a: float,
    b: float,
    breakpoints: Iterable[float] = (),
    n_uniform: int = 8,
    grade_lo: int = 0,
    grade_hi: int = 12,
) -> np.ndarray:
    """
    Build panel edges on [a, b].

    Uniform edges are merged with the caller's breakpoints, then refined
    geometrically towards either end (halving ``grade_lo``/``grade_hi`` times)
    where integrands such as 1/(T - t) vary fastest.
    """
    if b <= a:
        return np.array([a, b], dtype=float)
    width = (b - a) / n_uniform
    edges = list(np.linspace(a, b, n_uniform + 1))
    edges.extend(p for p in breakpoints if a < p < b)
    edges.extend(b - width * 0.5 ** k for k in range(1, grade_hi + 1))
    edges.extend(a + width * 0.5 ** k for k in range(1, grade_lo + 1))
    edges = np.unique(np.asarray(edges, dtype=float))
    # merge slivers left behind by breakpoints landing next to a uniform edge
    keep = np.concatenate([[True], np.diff(edges) > 1e-14 * max(1.0, abs(b))])
    return edges[keep]


def gauss_legendre_nodes(
    a: float,
    b: float,
    points: int = DEFAULT_QUAD_POINTS,
    breakpoints: Iterable[float] = (),
    n_uniform: int = 8,
    grade_lo: int = 0,
    grade_hi: int = 12,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nodes and weights of a composite Gauss-Legendre rule on [a, b].

    Args:
        a, b: Integration limits
        points: Nodes per panel
        breakpoints: Points where the integrand may be discontinuous
        n_uniform: Number of uniform base panels
        grade_lo, grade_hi: Geometric refinement levels at each end

    Returns:
        (nodes, weights), both 1-D arrays ordered by increasing node
    """
    edges = panel_edges(a, b, breakpoints, n_uniform, grade_lo, grade_hi)
    x, w = _legendre(points)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + hi) * 0.5 + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def tree_sum(values) -> float:
    """Pairwise summation in a fixed order, independent of how values were produced."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        return 0.0
    while v.size > 1:
        if v.size % 2:
            v = np.append(v, 0.0)
        v = v[0::2] + v[1::2]
    return float(v[0])


def total_variation(p, q) -> float:
    """Total-variation distance between two probability vectors."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return 0.5 * float(np.abs(p - q).sum())


def empirical_distribution(samples, num_states: int) -> np.ndarray:
    """Normalized histogram of integer samples over ``range(num_states)``."""
    samples = np.asarray(samples, dtype=int).ravel()
    counts = np.bincount(samples, minlength=num_states).astype(float)
    return counts / max(samples.size, 1)


def tv_standard_error(p, n: int) -> float:
    """Rough Monte Carlo standard error of an empirical TV distance at sample size n."""
    p = np.asarray(p, dtype=float)
    return 0.5 * float(np.sqrt(p * (1.0 - p) / max(n, 1)).sum())


def tree_sum_arrays(arrays) -> np.ndarray:
    """Pairwise sum of equally shaped arrays in list order."""
    stack = [np.asarray(a, dtype=float) for a in arrays]
    if not stack:
        raise ValueError("nothing to sum")
    while len(stack) > 1:
        paired = [stack[k] + stack[k + 1] for k in range(0, len(stack) - 1, 2)]
        if len(stack) % 2:
            paired.append(stack[-1])
        stack = paired
    return stack[0]
