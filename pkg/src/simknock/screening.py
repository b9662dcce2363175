"""Marginal (sure independence) screening across studies."""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import stats as sps

from .errors import InvalidD
from .knockoffs import DesignMatrix
from .stats import Experiment, Family


def _gaussian_pvalues(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Two-sided slope t-test p-values for each simple regression of y on x_j."""
    n = y.size
    xc = x - x.mean(axis=0)
    yc = y - y.mean()
    sxx = np.sum(xc * xc, axis=0)
    sxy = xc.T @ yc
    syy = yc @ yc
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = sxy / sxx
        rss = np.maximum(syy - slope * sxy, 0.0)
        se = np.sqrt(rss / (n - 2) / sxx)
        t = slope / se
    t = np.where(sxx > 0, t, 0.0)
    t = np.where(np.isnan(t), np.inf, t)
    return 2 * sps.t.sf(np.abs(t), n - 2)


def _logistic_wald(xj: np.ndarray, y: np.ndarray, max_iter: int = 25) -> float:
    """Wald p-value of the slope in a univariate logistic regression."""
    design = np.column_stack([np.ones_like(xj), xj])
    beta = np.zeros(2)
    cov = None
    for _ in range(max_iter):
        eta = design @ beta
        prob = 1 / (1 + np.exp(-eta))
        w = np.clip(prob * (1 - prob), 1e-10, None)
        info = design.T @ (design * w[:, None])
        try:
            cov = np.linalg.inv(info)
        except np.linalg.LinAlgError:
            return 1.0
        step = cov @ (design.T @ (y - prob))
        beta = beta + step
        if np.max(np.abs(step)) < 1e-8:
            break
    se = np.sqrt(cov[1, 1])
    if not np.isfinite(se) or se == 0:
        return 1.0
    return float(2 * sps.norm.sf(abs(beta[1] / se)))


def marginal_pvalues(exp: Experiment) -> np.ndarray:
    x = exp.x.values
    if exp.family is Family.GAUSSIAN:
        return _gaussian_pvalues(x, exp.y)
    return np.array([_logistic_wald(x[:, j], exp.y) for j in range(x.shape[1])])


def sis_screen(exps: Sequence[Experiment], top_d: int) -> tuple[list[Experiment], np.ndarray]:
    """Keep the ``top_d`` features with the smallest worst-study marginal p-value.

    Each feature is scored by the maximum over studies of its marginal
    p-value, so a feature survives only if it looks promising in every
    study. Returns the reduced experiments and the kept original indices
    (in increasing order).
    """
    exps = list(exps)
    p = exps[0].p
    if not 1 <= int(top_d) <= p:
        raise InvalidD(f"screening size d must satisfy 1 <= d <= p={p}; got {top_d}")
    scores = np.max(np.vstack([marginal_pvalues(e) for e in exps]), axis=0)
    order = np.argsort(scores, kind="stable")
    kept = np.sort(order[:int(top_d)])
    reduced = []
    for e in exps:
        names = tuple(e.x.column_names[j] for j in kept)
        reduced.append(Experiment(e.y, DesignMatrix(e.x.values[:, kept], names), e.family))
    return reduced, kept


def screening_rank(exps: Sequence[Experiment]) -> np.ndarray:
    """Feature indices ordered from most to least promising."""
    scores = np.max(np.vstack([marginal_pvalues(e) for e in exps]), axis=0)
    return np.argsort(scores, kind="stable")
