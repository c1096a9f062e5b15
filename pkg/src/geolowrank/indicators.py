"""Subset-quality indicators and the ratio protocol for comparing two choices.

For subsets S1 of X and S2 of Y:

    ind1 = max_{x,y} min_{u,v} |k(x,y) - k(u,v)|       O(mn)
    ind2 = max_x min_u ||K_{x S2} - K_{u S2}||          O(m)   (for O(1) subsets)
    ind3 = delta(X, S1)                                 O(m)
    ind4 = delta(Y, S2)                                 O(n)
    ind5 = ||K_{S1 S2}^+||                              O(1)

Smaller is better for all five. To compare choice A with choice B, take
ratio_k = ind_k(B) / ind_k(A): a ratio above 1 predicts that A gives the
smaller approximation error, below 1 that B does.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
from scipy.spatial.distance import cdist

from .factor import two_sided
from .kernels import DeskScaleError, KernelMatrixHandle
from .linalg import pinv_norm
from .pointset import SubsetSelection, delta

__all__ = [
    "IndicatorReport",
    "RatioRow",
    "compute_indicators",
    "compare_choices",
    "predict",
    "write_ratio_csv",
    "read_ratio_csv",
    "IND1_GUARD",
]

#: indicator 1 touches every kernel entry; refuse beyond this many.
IND1_GUARD = 10 ** 6
ALL = (1, 2, 3, 4, 5)


@dataclass
class IndicatorReport:
    values: dict                      # {k: float} for the computed indicators
    costs: dict                       # {k: approximate operation count}
    provenance: dict = field(default_factory=dict)

    def __getitem__(self, k: int) -> float:
        return self.values[k]


def _as_sel(S, ps) -> SubsetSelection:
    return S if isinstance(S, SubsetSelection) else SubsetSelection(ps, S)


def _ind1(h: KernelMatrixHandle, i1, i2, guard) -> float:
    m, n = h.shape
    if m * n > guard:
        raise DeskScaleError(f"indicator 1 needs all {m}x{n} kernel entries (guard {guard})")
    vals = np.sort(h.block(i1, i2).ravel())
    worst = 0.0
    step = max(1, guard // max(1, n) // 8)
    for lo in range(0, m, step):
        K = h.block(np.arange(lo, min(m, lo + step)), None).ravel()
        # nearest subset value = one of the two sorted neighbours
        pos = np.searchsorted(vals, K)
        below = vals[np.clip(pos - 1, 0, vals.size - 1)]
        above = vals[np.clip(pos, 0, vals.size - 1)]
        worst = max(worst, float(np.minimum(np.abs(K - below), np.abs(K - above)).max()))
    return worst


def compute_indicators(h: KernelMatrixHandle, S1, S2, which: Iterable[int] = ALL,
                       ind1_guard: int = IND1_GUARD) -> IndicatorReport:
    """Indicators ``which`` (subset of 1..5) for the choice (S1, S2)."""
    which = tuple(sorted(set(which)))
    if not set(which) <= set(ALL):
        raise ValueError("indicators are numbered 1..5")
    S1, S2 = _as_sel(S1, h.X), _as_sel(S2, h.Y)
    if len(S1) == 0 or len(S2) == 0:
        raise ValueError("subsets must be nonempty")
    i1, i2 = S1.indices, S2.indices
    m, n = h.shape
    r1, r2, d = i1.size, i2.size, h.X.dim
    vals, costs = {}, {}
    if 1 in which:
        vals[1] = _ind1(h, i1, i2, ind1_guard)
        costs[1] = m * n * max(1, math.ceil(math.log2(r1 * r2 + 1)))
    if 2 in which:
        C = h.block(None, i2)
        vals[2] = float(cdist(C, C[i1]).min(axis=1).max())
        costs[2] = m * r1 * r2
    if 3 in which:
        vals[3] = delta(h.X, S1)
        costs[3] = m * r1 * d
    if 4 in which:
        vals[4] = delta(h.Y, S2)
        costs[4] = n * r2 * d
    if 5 in which:
        vals[5] = pinv_norm(h.block(i1, i2))
        costs[5] = r1 * r2 * min(r1, r2)
    prov = {"S1": i1.tolist(), "S2": i2.tolist(), "S1_method": S1.method, "S2_method": S2.method}
    return IndicatorReport(vals, costs, prov)


def predict(ratio: Optional[float]) -> str:
    """"A" if the ratio B/A exceeds 1, "B" below 1, "tie" at 1."""
    if ratio is None or not math.isfinite(ratio):
        return "undefined"
    if ratio > 1.0:
        return "A"
    if ratio < 1.0:
        return "B"
    return "tie"


def _ratio(b: float, a: float) -> Optional[float]:
    if a == 0.0:
        return 1.0 if b == 0.0 else None
    return b / a


@dataclass
class RatioRow:
    rank: int
    ratios: dict                      # {1..5: float|None, "error": float|None}
    errors: tuple = (math.nan, math.nan)   # max-norm errors of (A, B)

    @property
    def predictions(self) -> dict:
        return {k: predict(v) for k, v in self.ratios.items()}

    @property
    def correct(self) -> dict:
        """Per indicator: does its prediction agree with the error ratio?"""
        truth = predict(self.ratios.get("error"))
        return {k: p == truth for k, p in self.predictions.items() if k != "error"}


Choice = Union[tuple, Callable[[int], tuple]]


def _choice_at(choice: Choice, r: int, h: KernelMatrixHandle):
    if callable(choice):
        return choice(r)
    S1, S2 = (_as_sel(S, ps) for S, ps in zip(choice, (h.X, h.Y)))
    return S1.prefix(r), S2.prefix(r)


def compare_choices(h: KernelMatrixHandle, choice_a: Choice, choice_b: Choice,
                    ranks: Sequence[int], which: Iterable[int] = ALL,
                    ind1_guard: int = IND1_GUARD) -> list[RatioRow]:
    """Ratio table B/A per rank.

    A choice is either a pair (S1, S2) whose first ``r`` indices are used at
    rank r, or a callable ``r -> (S1, S2)``. The ground-truth error is the
    max-norm error of K_{X S2} K_{S1 S2}^+ K_{S1 Y}.
    """
    which = tuple(which)
    K = h.dense()
    rows = []
    for r in ranks:
        (a1, a2), (b1, b2) = _choice_at(choice_a, r, h), _choice_at(choice_b, r, h)
        ia = compute_indicators(h, a1, a2, which, ind1_guard)
        ib = compute_indicators(h, b1, b2, which, ind1_guard)
        ea = float(np.abs(K - two_sided(h, a1, a2, stabilize=False).dense()).max())
        eb = float(np.abs(K - two_sided(h, b1, b2, stabilize=False).dense()).max())
        ratios = {k: _ratio(ib[k], ia[k]) for k in which}
        ratios["error"] = _ratio(eb, ea)
        rows.append(RatioRow(int(r), ratios, (ea, eb)))
    return rows


_CSV_COLS = ["rank"] + [f"ratio_ind{k}" for k in ALL] + ["ratio_error", "predictions"]


def write_ratio_csv(rows: Sequence[RatioRow], path: Union[str, Path]) -> None:
    """Columns: rank, ratio_ind1..ratio_ind5, ratio_error, predictions.

    Missing or undefined ratios are written as empty cells; predictions are
    ``ind1=B;ind2=B;...``.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_CSV_COLS)
        for row in rows:
            cells = [row.rank]
            for key in (*ALL, "error"):
                v = row.ratios.get(key)
                cells.append("" if v is None else repr(float(v)))
            preds = ";".join(f"ind{k}={p}" for k, p in row.predictions.items() if k != "error")
            cells.append(preds)
            w.writerow(cells)


def read_ratio_csv(path: Union[str, Path]) -> list[RatioRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            ratios = {}
            for k in ALL:
                cell = rec[f"ratio_ind{k}"]
                if cell != "" or f"ind{k}=" in rec["predictions"]:
                    ratios[k] = float(cell) if cell != "" else None
            ratios["error"] = float(rec["ratio_error"]) if rec["ratio_error"] != "" else None
            rows.append(RatioRow(int(rec["rank"]), ratios))
    return rows
