"""Pairwise similarity metrics, all mapped into [0, 1].

Profile metrics work on sparse ``{item: value}`` maps and only look at
co-indexed items. They return ``None`` when the pair has too little overlap
to say anything; callers treat that as "exclude this pair".
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Mapping, Optional


class VectorMetric(Enum):
    """Student-profile metrics; values are the chromosome gene ids."""

    EUCLIDEAN = 0
    TAXICAB = 1
    PEARSON = 2
    SPEARMAN = 3


class SetMetric(Enum):
    """Binary-set metrics; values are the chromosome gene ids."""

    JACCARD = 0
    LOG_LIKELIHOOD = 1


def _co_indexed(a: Mapping, b: Mapping) -> tuple:
    keys = sorted(a.keys() & b.keys(), key=str)
    return [float(a[k]) for k in keys], [float(b[k]) for k in keys]


def average_ranks(values: list) -> list:
    """1-based ranks; tied values share the mean of their positions."""
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def _pearson(xs: list, ys: list) -> Optional[float]:
    n = len(xs)
    if n < 2 or len(set(xs)) == 1 or len(set(ys)) == 1:
        return None
    mx, my = math.fsum(xs) / n, math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    num = math.fsum(p * q for p, q in zip(dx, dy))
    den = math.sqrt(math.fsum(p * p for p in dx) * math.fsum(q * q for q in dy))
    r = max(-1.0, min(1.0, num / den))
    return (r + 1.0) / 2.0


def correlation_similarity(kind: VectorMetric, a: Mapping, b: Mapping) -> Optional[float]:
    """Pearson or Spearman correlation over co-rated items, mapped to (r + 1) / 2.

    Undefined (None) with fewer than two co-rated items or when either side is
    constant over them.
    """
    xs, ys = _co_indexed(a, b)
    if kind is VectorMetric.SPEARMAN:
        if len(xs) < 2 or len(set(xs)) == 1 or len(set(ys)) == 1:
            return None
        xs, ys = average_ranks(xs), average_ranks(ys)
    elif kind is not VectorMetric.PEARSON:
        raise ValueError(f"not a correlation metric: {kind}")
    return _pearson(xs, ys)


def distance_similarity(kind: VectorMetric, a: Mapping, b: Mapping) -> Optional[float]:
    """1 / (1 + d), with d the per-item mean Euclidean or taxicab distance."""
    xs, ys = _co_indexed(a, b)
    n = len(xs)
    if n == 0:
        return None
    if kind is VectorMetric.EUCLIDEAN:
        d = math.sqrt(math.fsum((x - y) ** 2 for x, y in zip(xs, ys)))
    elif kind is VectorMetric.TAXICAB:
        d = math.fsum(abs(x - y) for x, y in zip(xs, ys))
    else:
        raise ValueError(f"not a distance metric: {kind}")
    return 1.0 / (1.0 + d / n)


def profile_similarity(kind: VectorMetric, a: Mapping, b: Mapping) -> Optional[float]:
    if kind in (VectorMetric.PEARSON, VectorMetric.SPEARMAN):
        return correlation_similarity(kind, a, b)
    return distance_similarity(kind, a, b)


def _xlogx(x: float) -> float:
    return x * math.log(x) if x > 0 else 0.0


def _entropy(*counts: float) -> float:
    # unnormalized Shannon entropy, N*H(p)
    return _xlogx(sum(counts)) - sum(_xlogx(c) for c in counts)


def log_likelihood_ratio(k11: int, k12: int, k21: int, k22: int) -> float:
    """Dunning's G^2 statistic for a 2x2 contingency table."""
    row = _entropy(k11 + k12, k21 + k22)
    col = _entropy(k11 + k21, k12 + k22)
    mat = _entropy(k11, k12, k21, k22)
    # rounding can push an exactly independent table a hair below zero
    return max(0.0, 2.0 * (row + col - mat))


def binary_set_similarity(kind: SetMetric, a, b, universe: int) -> float:
    a, b = set(a), set(b)
    union = len(a | b)
    if universe < union:
        raise ValueError(f"universe {universe} is smaller than the union of the sets ({union})")
    if kind is SetMetric.JACCARD:
        return 1.0 if union == 0 else len(a & b) / union
    if kind is SetMetric.LOG_LIKELIHOOD:
        k11 = len(a & b)
        g2 = log_likelihood_ratio(k11, len(b - a), len(a - b), universe - union)
        return 1.0 - 1.0 / (1.0 + g2)
    raise ValueError(f"unknown set metric: {kind}")


def exact_match_similarity(a, b) -> float:
    return 1.0 if a == b else 0.0
