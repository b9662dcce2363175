"""Knockoff and knockoff+ thresholds on a filter vector."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .combiners import FilterStats
from .errors import InvalidQ


@dataclass(frozen=True)
class SelectionReport:
    selected: tuple
    threshold: float
    plus: bool
    q: float
    fdp_estimate: float
    w: FilterStats


def _check_q(q: float) -> float:
    q = float(q)
    if not 0 < q < 1:
        raise InvalidQ(f"target FDR q must lie in (0, 1); got {q}")
    return q


def fdp_estimate(w, t: float) -> float:
    """``#{w <= -t} / max(#{w >= t}, 1)``."""
    w = np.asarray(w, dtype=float)
    return float(np.sum(w <= -t) / max(int(np.sum(w >= t)), 1))


def knockoff_threshold(w, q: float, plus: bool = True) -> float:
    """Smallest candidate ``t`` in ``{|w_j| > 0}`` whose estimated FDP is at most q.

    Returns ``inf`` when no candidate qualifies.
    """
    q = _check_q(q)
    w = np.asarray(w, dtype=float).ravel()
    cand = np.unique(np.abs(w[w != 0]))
    if cand.size == 0:
        return float("inf")
    srt = np.sort(w)
    # #{w >= t} and #{w <= -t} for every candidate at once
    n_pos = srt.size - np.searchsorted(srt, cand, side="left")
    n_neg = np.searchsorted(srt, -cand, side="right")
    ratio = (n_neg + (1 if plus else 0)) / np.maximum(n_pos, 1)
    ok = np.flatnonzero(ratio <= q)
    return float(cand[ok[0]]) if ok.size else float("inf")


def knockoff_threshold_bruteforce(w, q: float, plus: bool = True) -> float:
    """Reference threshold by direct scan over the candidate set."""
    q = _check_q(q)
    w = np.asarray(w, dtype=float).ravel()
    offset = 1 if plus else 0
    best = float("inf")
    for t in {abs(v) for v in w if v != 0}:
        ratio = (offset + sum(1 for v in w if v <= -t)) / max(sum(1 for v in w if v >= t), 1)
        if ratio <= q and t < best:
            best = t
    return best


def select(w, q: float, plus: bool = True) -> SelectionReport:
    """Apply the (plus) knockoff filter and return the selection report."""
    q = _check_q(q)
    if not isinstance(w, FilterStats):
        w = FilterStats(np.asarray(w, dtype=float).ravel())
    t = knockoff_threshold(w.w, q, plus)
    if np.isfinite(t):
        selected = tuple(int(j) for j in np.flatnonzero(w.w >= t))
        fdp = fdp_estimate(w.w, t)
    else:
        selected, fdp = (), 0.0
    return SelectionReport(selected, t, bool(plus), q, fdp, w)
