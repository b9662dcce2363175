"""
Empirical log-likelihood-ratio statistic measuring how far Gaussian
knockoffs built from a working model ``Q`` are from being exchangeable
under the true feature law ``P``.

For feature ``j`` of one study::

    KL_j = sum_i log[ P(x_ij | x_i,-j) Q(xt_ij | x_i,-j) ]
                   - log[ Q(x_ij | x_i,-j) P(xt_ij | x_i,-j) ]

Both conditionals are univariate normals read off the precision matrix.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NonPositiveDefinite
from .knockoffs import GaussianModel, as_design


@dataclass(frozen=True)
class KlReport:
    kl_hat: np.ndarray
    min_over_studies: np.ndarray


def _conditionals(model: GaussianModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Conditional means (n x p) and variances (p,) of each ``X_j | X_-j``."""
    try:
        theta = np.linalg.inv(model.covariance)
        np.linalg.cholesky(model.covariance)
    except np.linalg.LinAlgError as exc:
        raise NonPositiveDefinite(str(exc)) from None
    d = np.diag(theta)
    centered = x - model.mean
    # x_j - mean_j|rest = (Theta (x - m))_j / Theta_jj
    mean = x - centered @ theta / d
    return mean, 1.0 / d


def _logpdf(v: np.ndarray, mean: np.ndarray, var: np.ndarray) -> np.ndarray:
    # the 2*pi constant cancels in every ratio below
    return -0.5 * np.log(var) - 0.5 * (v - mean) ** 2 / var


def _log_ratio(v: np.ndarray, p_mean, p_var, q_mean, q_var) -> np.ndarray:
    """``log P(v | rest) - log Q(v | rest)`` elementwise."""
    return _logpdf(v, p_mean, p_var) - _logpdf(v, q_mean, q_var)


def kl_hat_gaussian(x, xtilde, p_model: GaussianModel, q_model: GaussianModel) -> np.ndarray:
    """Per-feature statistic for one study (vector of length p)."""
    x = as_design(x).values
    xtilde = np.asarray(xtilde, dtype=float)
    if xtilde.shape != x.shape:
        raise DimensionMismatch(f"knockoffs {xtilde.shape} do not match design {x.shape}")
    if p_model.p != x.shape[1] or q_model.p != x.shape[1]:
        raise DimensionMismatch(
            f"models have {p_model.p} and {q_model.p} features, design has {x.shape[1]}")
    p_mean, p_var = _conditionals(p_model, x)
    q_mean, q_var = _conditionals(q_model, x)
    terms = (_log_ratio(x, p_mean, p_var, q_mean, q_var)
             - _log_ratio(xtilde, p_mean, p_var, q_mean, q_var))
    return terms.sum(axis=0)


def kl_report(xs: Sequence, xtildes: Sequence, p_models: Sequence[GaussianModel],
              q_models: Sequence[GaussianModel]) -> KlReport:
    """Stack per-study rows; the minimum is taken over all studies.

    ``xs`` may hold design matrices or Experiments.
    """
    k = len(xs)
    if not (len(xtildes) == len(p_models) == len(q_models) == k) or k == 0:
        raise DimensionMismatch("need the same nonzero number of designs, knockoffs and models")
    rows = []
    for x, xt, pm, qm in zip(xs, xtildes, p_models, q_models):
        x = getattr(x, "x", x)
        xt = getattr(xt, "xtilde", xt)
        rows.append(kl_hat_gaussian(x, xt, pm, qm))
    kl = np.vstack(rows)
    return KlReport(kl, kl.min(axis=0))
