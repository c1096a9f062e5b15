"""Linear-cost geometric subset selection.

All selectors return a :class:`~geolowrank.pointset.SubsetSelection` holding
exactly ``r`` distinct indices into the input set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .pointset import PointSet, SubsetSelection

__all__ = [
    "SelectorConfig",
    "fps_select",
    "uniform_select",
    "mixed_select",
    "anchor_grid_select",
    "select",
    "SELECTOR_METHODS",
]

SELECTOR_METHODS = ("fps", "uniform", "mixed", "anchor")
FPS_STARTS = ("farthest-from-centroid", "index0", "seeded-random")


@dataclass(frozen=True)
class SelectorConfig:
    method: str = "fps"
    fps_fraction: float = 0.2
    seed: int = 0
    fps_start: str = "farthest-from-centroid"

    def __post_init__(self):
        if self.method not in SELECTOR_METHODS:
            raise ValueError(f"unknown selector {self.method!r}; choose from {SELECTOR_METHODS}")
        if not 0.0 <= self.fps_fraction <= 1.0:
            raise ValueError("fps_fraction must lie in [0, 1]")
        if self.fps_start not in FPS_STARTS:
            raise ValueError(f"unknown fps_start {self.fps_start!r}; choose from {FPS_STARTS}")


def _check_count(r, n):
    if not 1 <= r <= n:
        raise ValueError(f"sample count r={r} must satisfy 1 <= r <= {n}")


def _start_index(P: np.ndarray, config: SelectorConfig) -> int:
    if config.fps_start == "index0":
        return 0
    if config.fps_start == "seeded-random":
        return int(np.random.default_rng(config.seed).integers(P.shape[0]))
    return int(np.argmax(_sq_dist_to(P, P.mean(axis=0))))


def _sq_dist_to(P: np.ndarray, p: np.ndarray) -> np.ndarray:
    D = P - p
    return np.einsum("ij,ij->i", D, D)


def _fps_extend(P: np.ndarray, chosen: list, r: int) -> list:
    """Greedy max-min extension of ``chosen`` up to ``r`` indices.

    Keeps the squared distance of every point to the current selection, so
    each added point costs one O(n d) sweep. Already chosen points are masked
    with -1; ``argmax`` breaks ties towards the lowest index.
    """
    n = P.shape[0]
    mind = np.full(n, np.inf)
    for j in chosen:
        np.minimum(mind, _sq_dist_to(P, P[j]), out=mind)
    chosen = list(chosen)
    mind[chosen] = -1.0
    while len(chosen) < r:
        j = int(np.argmax(mind))
        chosen.append(j)
        np.minimum(mind, _sq_dist_to(P, P[j]), out=mind)
        mind[j] = -1.0
    return chosen


def fps_select(ps: PointSet, r: int, config: Optional[SelectorConfig] = None) -> SubsetSelection:
    """Farthest point sampling: start from one point, then repeatedly add the
    point farthest from the current selection. Cost O(d r n)."""
    config = config or SelectorConfig()
    P = ps.points
    _check_count(r, P.shape[0])
    idx = _fps_extend(P, [_start_index(P, config)], r)
    return SubsetSelection(ps, idx, method="fps", seed=config.seed)


def uniform_select(ps: PointSet, r: int, seed: int = 0) -> SubsetSelection:
    _check_count(r, len(ps))
    idx = np.random.default_rng(seed).choice(len(ps), size=r, replace=False)
    return SubsetSelection(ps, idx, method="uniform", seed=seed)


def mixed_select(ps: PointSet, r: int, fps_fraction: float, seed: int = 0,
                 config: Optional[SelectorConfig] = None) -> SubsetSelection:
    """ceil(fps_fraction * r) FPS points followed by uniform draws from the rest."""
    n = len(ps)
    _check_count(r, n)
    if not 0.0 <= fps_fraction <= 1.0:
        raise ValueError("fps_fraction must lie in [0, 1]")
    # the 1e-9 guards against 0.1 * 30 = 3.0000000000000004
    k = min(r, math.ceil(fps_fraction * r - 1e-9))
    head = []
    if k > 0:
        cfg = config or SelectorConfig(seed=seed)
        head = list(fps_select(ps, k, cfg).indices)
    rest = np.setdiff1d(np.arange(n), head, assume_unique=True)
    tail = rest[np.random.default_rng(seed).choice(rest.size, size=r - k, replace=False)]
    return SubsetSelection(ps, np.concatenate([np.asarray(head, dtype=np.intp), tail]),
                           method="mixed", seed=seed, fps_fraction=fps_fraction)


def anchor_points(r: int, d: int) -> np.ndarray:
    """The first r points of the unscrambled Halton sequence in [0, 1]^d,
    skipping the origin. Fixed and deterministic (anchor scheme v1)."""
    return qmc.Halton(d, scramble=False).random(r + 1)[1:]


def anchor_grid_select(ps: PointSet, r: int, seed: int = 0) -> SubsetSelection:
    """Low-discrepancy anchors mapped onto the data.

    This is a stand-in for the anchor net method: the data are mapped
    affinely into the unit box, ``r`` Halton anchors are laid down, and each
    anchor claims its nearest data point. Anchors that collide leave a
    shortfall which is filled by farthest point sampling over the remaining
    points. Cost O(d r n). ``seed`` is recorded only, the scheme is
    deterministic.
    """
    P = ps.points
    n, d = P.shape
    _check_count(r, n)
    lo = P.min(axis=0)
    span = P.max(axis=0) - lo
    span[span == 0.0] = 1.0
    U = (P - lo) / span
    chosen = []
    taken = np.zeros(n, dtype=bool)
    for a in anchor_points(r, d):
        j = int(np.argmin(_sq_dist_to(U, a)))
        if not taken[j]:
            taken[j] = True
            chosen.append(j)
    if len(chosen) < r:
        chosen = _fps_extend(P, chosen, r)
    return SubsetSelection(ps, chosen, method="anchor", seed=seed)


def select(ps: PointSet, r: int, config: SelectorConfig) -> SubsetSelection:
    if config.method == "fps":
        return fps_select(ps, r, config)
    if config.method == "uniform":
        return uniform_select(ps, r, config.seed)
    if config.method == "mixed":
        return mixed_select(ps, r, config.fps_fraction, config.seed, config)
    return anchor_grid_select(ps, r, config.seed)
