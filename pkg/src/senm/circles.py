"""Contact-frequency circles via one-dimensional flat-kernel mean shift."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateInput, EmptyNetwork, ValidationError
from .preprocessing import RelationshipAggregate

# Expected cumulative circle sizes for humans and the ratio between them.
REFERENCE_CIRCLE_SIZES = (1.5, 5.0, 15.0, 50.0, 150.0)
SCALING_RATIO = 3.0


@dataclass(frozen=True)
class CirclesConfig:
    bandwidth_quantile: float = 0.3
    max_iterations: int = 500
    convergence_factor: float = 1e-6
    log_scale: bool = True

    def validate(self) -> None:
        if not 0.0 < self.bandwidth_quantile <= 1.0:
            raise ValidationError("bandwidth_quantile must lie in (0, 1]")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if not 0.0 < self.convergence_factor < 1.0:
            raise ValidationError("convergence_factor must lie in (0, 1)")


@dataclass
class CircleStructure:
    ego_id: str
    optimum_circles: int
    cluster_means: list[float]
    membership: dict[str, int]
    nested_sizes: list[int]

    def members(self, circle: int) -> list[str]:
        """Alters inside nested circle ``circle`` (clusters 0..circle)."""
        return sorted(a for a, c in self.membership.items() if c <= circle)


def estimate_bandwidth(frequencies: Sequence[float], quantile: float = 0.3) -> float:
    """Mean distance from each point to its ceil(quantile*(n-1))-th nearest
    neighbour; falls back to 10% of the data range when that mean is zero."""
    x = np.sort(np.asarray(frequencies, dtype=float))
    n = x.size
    if n < 2:
        raise DegenerateInput("need at least two frequencies")
    if not 0.0 < quantile <= 1.0:
        raise ValueError("quantile must lie in (0, 1]")
    span = x[-1] - x[0]
    if span == 0:
        raise DegenerateInput("all frequencies are equal")
    k = max(1, math.ceil(quantile * (n - 1)))
    # k-th neighbour of x[i] takes j points from the left and k-j from the right
    idx = np.arange(n)
    best = np.full(n, np.inf)
    for j in range(k + 1):
        left, right = idx - j, idx + (k - j)
        ok = (left >= 0) & (right < n)
        d = np.maximum(x - x[np.clip(left, 0, n - 1)], x[np.clip(right, 0, n - 1)] - x)
        best = np.where(ok, np.minimum(best, d), best)
    bw = float(best.mean())
    if bw <= 0:
        bw = 0.1 * float(span)
    return bw


def _window_means(x: np.ndarray, csum: np.ndarray, pos: np.ndarray, bw: float) -> np.ndarray:
    lo = np.searchsorted(x, pos - bw, side="left")
    hi = np.searchsorted(x, pos + bw, side="right")
    return (csum[hi] - csum[lo]) / (hi - lo)


def mean_shift_1d(
    frequencies: Sequence[float],
    bandwidth: float,
    max_iterations: int = 500,
    convergence_factor: float = 1e-6,
) -> tuple[list[float], list[int]]:
    """Flat-kernel mean shift seeded at every point.

    Returns ``(modes, assignment)`` with modes sorted descending, so cluster 0
    is the highest-frequency cluster; ``assignment[i]`` indexes ``modes`` for
    the i-th input value. Modes that attract no point are dropped.
    """
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    values = np.asarray(frequencies, dtype=float)
    if values.size == 0:
        return [], []
    x = np.sort(values)
    csum = np.concatenate(([0.0], np.cumsum(x)))

    # identical seeds follow identical paths; iterate over unique values only
    seeds, weight = np.unique(x, return_counts=True)
    pos = seeds.copy()
    tol = convergence_factor * bandwidth
    moving = np.ones(pos.size, dtype=bool)
    for _ in range(max_iterations):
        if not moving.any():
            break
        new = _window_means(x, csum, pos[moving], bandwidth)
        shift = np.abs(new - pos[moving])
        pos[moving] = new
        still = np.zeros_like(moving)
        still[np.flatnonzero(moving)[shift >= tol]] = True
        moving = still

    # merge converged seeds in ascending order into the running group
    order = np.argsort(pos, kind="stable")
    modes: list[float] = []
    total = count = 0.0
    for i in order:
        p, w = pos[i], weight[i]
        if count and p - total / count <= bandwidth:
            total += p * w
            count += w
            continue
        if count:
            modes.append(total / count)
        total, count = p * w, w
    modes.append(total / count)

    m = np.asarray(modes)
    nearest = np.abs(values[:, None] - m[None, :]).argmin(axis=1)  # ties go to the lower mode
    used = np.unique(nearest)
    m = m[used]
    remap = np.empty(len(modes), dtype=int)
    # relabel: highest mode becomes cluster 0
    remap[used] = np.arange(used.size)[::-1]
    return [float(v) for v in m[::-1]], [int(c) for c in remap[nearest]]


def build_circles(
    aggregates: Sequence[RelationshipAggregate],
    assignment: Sequence[int],
    modes: Sequence[float],
    ego_id: Optional[str] = None,
) -> CircleStructure:
    """Order clusters by mean member frequency (descending) and nest them."""
    if not aggregates:
        raise EmptyNetwork(f"ego {ego_id!r} has no active alters")
    if len(assignment) != len(aggregates):
        raise ValueError("assignment must cover every active alter")
    ego = ego_id if ego_id is not None else aggregates[0].ego_id
    labels = sorted(set(assignment))
    if any(c < 0 or c >= len(modes) for c in labels):
        raise ValueError("assignment references an unknown mode")
    sums = {c: 0.0 for c in labels}
    sizes = {c: 0 for c in labels}
    for agg, c in zip(aggregates, assignment):
        sums[c] += agg.annualized_frequency
        sizes[c] += 1
    means = {c: sums[c] / sizes[c] for c in labels}
    ranked = sorted(labels, key=lambda c: (-means[c], c))
    rank = {c: i for i, c in enumerate(ranked)}
    nested = np.cumsum([sizes[c] for c in ranked]).tolist()
    return CircleStructure(
        ego_id=ego,
        optimum_circles=len(ranked),
        cluster_means=[means[c] for c in ranked],
        membership={agg.alter_id: rank[c] for agg, c in zip(aggregates, assignment)},
        nested_sizes=[int(v) for v in nested],
    )


def compute_circles(active: Sequence[RelationshipAggregate], config: CirclesConfig = CirclesConfig()) -> Optional[CircleStructure]:
    """Full per-ego clustering. Returns None for degenerate egos (< 2 active alters)."""
    if len(active) < 2:
        return None
    freqs = np.array([a.annualized_frequency for a in active])
    values = np.log(freqs) if config.log_scale else freqs
    try:
        bw = estimate_bandwidth(values, config.bandwidth_quantile)
    except DegenerateInput:
        # every alter has the same frequency: a single circle
        return build_circles(active, [0] * len(active), [float(values[0])])
    modes, assignment = mean_shift_1d(values, bw, config.max_iterations, config.convergence_factor)
    return build_circles(active, assignment, modes)
