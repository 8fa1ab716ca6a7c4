"""Vectorized (numpy) counterparts of the scalar distance functions.

These back the all-pairs individual-bias computation and the resampled
evaluation loops in the significance module, where the scalar functions
would be called millions of times. Each helper mirrors its scalar twin
exactly; the test suite asserts the agreement.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .distances import NEUTRAL_PENALTY, rank_weights
from .errors import MeasureUndefinedError, ParameterError, ProfileError
from .types import PROB_TOL, AttributeSchema, RankedList, UserProfile


def item_pool(lists: Sequence[RankedList]) -> tuple[str, ...]:
    """Sorted union of item ids across lists."""
    pool: set[str] = set()
    for lst in lists:
        pool.update(lst.item_ids())
    return tuple(sorted(pool))


def encode_lists(lists: Sequence[RankedList], pool: Sequence[str]) -> list[np.ndarray]:
    """Each list as an array of pool indices in rank order."""
    index = {item_id: i for i, item_id in enumerate(pool)}
    return [np.fromiter((index[i] for i in lst.item_ids()), dtype=np.int64, count=lst.depth) for lst in lists]


def topk_distance_matrix(lists: Sequence[RankedList], k: int) -> np.ndarray:
    """Pairwise top-k overlap distance matrix (mirrors topk_overlap_distance)."""
    pool = item_pool(lists)
    n = len(lists)
    width = max(len(pool), 1)
    presence = np.zeros((n, width), dtype=np.float32)
    depths = np.zeros(n, dtype=np.int64)
    index = {item_id: i for i, item_id in enumerate(pool)}
    for row, lst in enumerate(lists):
        ids = lst.item_ids()[: min(k, lst.depth)]
        depths[row] = len(ids)
        for item_id in ids:
            presence[row, index[item_id]] = 1.0
    overlap = presence @ presence.T
    denom = np.minimum.outer(depths, depths).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        dist = 1.0 - overlap / denom
    empty = depths == 0
    if empty.any():
        dist[empty, :] = 1.0
        dist[:, empty] = 1.0
        both = np.ix_(empty, empty)
        dist[both] = 0.0
    np.fill_diagonal(dist, 0.0)
    return dist


def distribution_matrix(
    lists: Sequence[RankedList],
    attribute: AttributeSchema,
    k: int,
    weighting: str,
) -> np.ndarray:
    """Per-list top-k attribute distributions, renormalized over annotated mass.

    Rows follow the order of ``lists``; columns follow ``attribute.values``.
    Raises when some list carries no annotated mass at all, like the scalar
    distance does.
    """
    values = {value: i for i, value in enumerate(attribute.values)}
    out = np.zeros((len(lists), len(values)), dtype=np.float64)
    for row, lst in enumerate(lists):
        n = min(k, lst.depth)
        if n == 0:
            raise MeasureUndefinedError(
                f"empty list ({lst.user_id!r}, {lst.query_id!r}) has no attribute distribution"
            )
        weights = rank_weights(n, weighting)
        annotated = 0.0
        for w, item in zip(weights, lst.items):
            for value, share in item.annotation_for(attribute.name).items():
                out[row, values[value]] += w * share
                annotated += w * share
        if annotated <= PROB_TOL:
            raise MeasureUndefinedError(
                f"list ({lst.user_id!r}, {lst.query_id!r}) carries no annotated mass"
            )
        out[row] /= annotated
    return out


def chebyshev_matrix(dists: np.ndarray) -> np.ndarray:
    """Pairwise max-absolute-difference matrix between distribution rows."""
    n, m = dists.shape
    out = np.zeros((n, n), dtype=np.float64)
    for col in range(m):
        column = dists[:, col]
        np.maximum(out, np.abs(column[:, None] - column[None, :]), out=out)
    return out


def user_distance_matrix(
    profiles: Sequence[UserProfile],
    relevant_attrs: Sequence[str],
    numeric_ranges: Mapping[str, tuple[float, float]] | None = None,
) -> np.ndarray:
    """Pairwise profile distance matrix (mirrors user_distance)."""
    attrs = sorted(set(relevant_attrs))
    if not attrs:
        raise ParameterError("relevant_attrs must be non-empty")
    ranges = numeric_ranges or {}
    n = len(profiles)
    total = np.zeros((n, n), dtype=np.float64)
    for attr in attrs:
        for profile in profiles:
            if attr in profile.protected:
                raise ProfileError(f"attribute {attr!r} is protected and cannot drive user distance")
            if attr not in profile.other:
                raise ProfileError(f"profile {profile.user_id!r} is missing relevant attribute {attr!r}")
        raw = [profile.other[attr] for profile in profiles]
        numeric = all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw)
        if numeric:
            if attr not in ranges:
                raise ParameterError(f"numeric attribute {attr!r} has no declared range")
            lo, hi = ranges[attr]
            if not hi > lo:
                raise ParameterError(f"attribute {attr!r}: declared range ({lo!r}, {hi!r}) is empty")
            vals = np.asarray(raw, dtype=np.float64)
            total += np.minimum(1.0, np.abs(vals[:, None] - vals[None, :]) / (float(hi) - float(lo)))
        else:
            codes = {}
            enc = np.fromiter((codes.setdefault(v, len(codes)) for v in raw), dtype=np.int64, count=n)
            total += (enc[:, None] != enc[None, :]).astype(np.float64)
    return total / len(attrs)


def kendall_encoded(seq_a: np.ndarray, seq_b: np.ndarray) -> float:
    """Kendall distance between two index sequences (mirrors kendall_distance)."""
    if seq_a.size == 0 and seq_b.size == 0:
        return 0.0
    union = np.union1d(seq_a, seq_b)
    u = union.size
    pa = np.full(u, -1, dtype=np.int64)
    pb = np.full(u, -1, dtype=np.int64)
    pa[np.searchsorted(union, seq_a)] = np.arange(seq_a.size)
    pb[np.searchsorted(union, seq_b)] = np.arange(seq_b.size)
    in_a = pa >= 0
    in_b = pb >= 0
    both_a = in_a[:, None] & in_a[None, :]
    both_b = in_b[:, None] & in_b[None, :]
    order_a = pa[:, None] < pa[None, :]
    order_b = pb[:, None] < pb[None, :]
    b_first = in_b[:, None] & ~in_b[None, :]
    b_second = ~in_b[:, None] & in_b[None, :]
    a_first = in_a[:, None] & ~in_a[None, :]
    a_second = ~in_a[:, None] & in_a[None, :]

    case1 = both_a & both_b
    case2a = both_a & ~both_b & (in_b[:, None] | in_b[None, :])
    case2b = both_b & ~both_a & (in_a[:, None] | in_a[None, :])
    only_a = in_a & ~in_b
    only_b = in_b & ~in_a
    case3 = (only_a[:, None] & only_b[None, :]) | (only_b[:, None] & only_a[None, :])
    case4 = (only_a[:, None] & only_a[None, :]) | (only_b[:, None] & only_b[None, :])

    penalty = np.zeros((u, u), dtype=np.float64)
    penalty += case1 & (order_a != order_b)
    penalty += case2a & ((b_first & ~order_a) | (b_second & order_a))
    penalty += case2b & ((a_first & ~order_b) | (a_second & order_b))
    penalty += case3
    penalty += case4 * NEUTRAL_PENALTY
    denom = (case1 | case2a | case2b | case3).astype(np.float64) + case4 * NEUTRAL_PENALTY

    upper = np.triu_indices(u, k=1)
    total_denom = float(denom[upper].sum())
    if total_denom == 0.0:
        return 0.0 if seq_a.size == seq_b.size and np.array_equal(seq_a, seq_b) else 1.0
    return float(penalty[upper].sum()) / total_denom
