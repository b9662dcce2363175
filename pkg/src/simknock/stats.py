"""
Per-study importance statistics from l1-penalised regressions of the
response on the augmented design ``[X Xt]``.

All fits standardise the columns internally (mean 0, variance 1 with the
``1/n`` convention) and report coefficients on that standardised scale.
The Gaussian objective is ``(1/2n)||y_c - X b||^2 + lam ||b||_1`` with
``y_c`` the centred response; the binomial objective replaces the squared
error with the mean negative log-likelihood and carries a free intercept.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _cd
from .errors import (
    DegenerateColumn,
    DimensionMismatch,
    NoConvergence,
    ValidationError,
)
from .knockoffs import DesignMatrix, KnockoffCopy, as_design, design_for_statistics

TOL = 1e-7
MAX_SWEEPS = 10_000
MAX_OUTER = 50
N_LAMBDA = 100
LAMBDA_RATIO = 1e-3


class Family(str, enum.Enum):
    GAUSSIAN = "gaussian"
    BINOMIAL = "binomial"

    @classmethod
    def parse(cls, value: "str | Family") -> "Family":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        key = {"binary": "binomial", "logistic": "binomial", "continuous": "gaussian",
               "normal": "gaussian"}.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValidationError(
                f"unknown family {value!r}; valid names: gaussian, binomial") from None


class StatisticKind(str, enum.Enum):
    ABS_COEF = "abs-coef"
    PATH_ENTRY = "path-entry"


@dataclass(frozen=True)
class Experiment:
    """One study: response, design and outcome family."""

    y: np.ndarray
    x: DesignMatrix
    family: Family = Family.GAUSSIAN

    def __post_init__(self):
        x = as_design(self.x)
        family = Family.parse(self.family)
        y = np.asarray(self.y, dtype=float).ravel()
        if y.size != x.n:
            raise DimensionMismatch(f"response has {y.size} entries, design has {x.n} rows")
        if not np.all(np.isfinite(y)):
            raise ValidationError("response contains non-finite entries")
        if family is Family.BINOMIAL and not np.all((y == 0) | (y == 1)):
            raise ValidationError("binomial response must contain only 0/1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "family", family)

    @property
    def n(self) -> int:
        return self.x.n

    @property
    def p(self) -> int:
        return self.x.p


@dataclass(frozen=True)
class LassoFit:
    coefficients: np.ndarray
    intercept: float
    lam: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class ZStats:
    z: np.ndarray
    ztilde: np.ndarray
    lambda_used: float
    statistic_kind: StatisticKind


# --------------------------------------------------------------------------
# standardisation helpers

class _Standardized:
    """Column-standardised copy of a design, plus what is needed to apply
    the same affine map to held-out rows."""

    def __init__(self, design: np.ndarray):
        design = np.asarray(design, dtype=float)
        self.mean = design.mean(axis=0)
        centered = design - self.mean
        self.scale = np.sqrt(np.mean(centered * centered, axis=0))
        bad = np.flatnonzero(self.scale <= 1e-12 * np.maximum(1.0, np.abs(self.mean)))
        if bad.size:
            raise DegenerateColumn(f"zero-variance design column(s) {bad[:5].tolist()}")
        self.x = centered / self.scale
        self.n = design.shape[0]
        self._gram = None

    @property
    def gram(self) -> np.ndarray:
        if self._gram is None:
            g = self.x.T @ self.x / self.n
            self._gram = (g + g.T) / 2
        return self._gram

    def apply(self, design: np.ndarray) -> np.ndarray:
        return (design - self.mean) / self.scale


def _check_inputs(design, y, family):
    design = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    family = Family.parse(family)
    if design.ndim != 2 or design.shape[0] != y.size:
        raise DimensionMismatch(f"design {design.shape} incompatible with response of length {y.size}")
    if not (np.all(np.isfinite(design)) and np.all(np.isfinite(y))):
        raise ValidationError("non-finite entries in design or response")
    if family is Family.BINOMIAL and not np.all((y == 0) | (y == 1)):
        raise ValidationError("binomial response must contain only 0/1")
    return design, y, family


def _lambda_max(std: _Standardized, y: np.ndarray) -> float:
    yc = y - y.mean()
    return float(np.max(np.abs(std.x.T @ yc)) / std.n)


def lambda_grid(lam_max: float, n_lambda: int = N_LAMBDA, ratio: float = LAMBDA_RATIO) -> np.ndarray:
    """Decreasing log-spaced grid from ``lam_max`` to ``ratio * lam_max``."""
    if lam_max <= 0:
        lam_max = 1.0
    return np.geomspace(lam_max, lam_max * ratio, n_lambda)


def _solve(std: _Standardized, y: np.ndarray, family: Family, lam: float,
           beta: np.ndarray, b0: float) -> tuple[float, int, bool]:
    """Fit at one penalty, warm-started from (and overwriting) ``beta``."""
    if family is Family.GAUSSIAN:
        yc = y - y.mean()
        xty = std.x.T @ yc / std.n
        sweeps, ok = _cd.gram_cd(std.gram, xty, beta, lam, TOL, MAX_SWEEPS)
        return float(y.mean()), int(sweeps), bool(ok)
    b0, sweeps, ok = _cd.logistic_cd(std.x, y, beta, b0, lam, TOL, MAX_SWEEPS, MAX_OUTER)
    return float(b0), int(sweeps), bool(ok)


def _null_intercept(y: np.ndarray, family: Family) -> float:
    if family is Family.GAUSSIAN:
        return float(y.mean())
    ybar = min(max(y.mean(), 1e-5), 1 - 1e-5)
    return float(np.log(ybar / (1 - ybar)))


def lasso_fit(design, y, family="gaussian", lam: float = 0.1,
              init: np.ndarray | None = None) -> LassoFit:
    """Coordinate-descent lasso (or l1-logistic) fit at a single penalty.

    Parameters
    ----------
    design : (n, m) array
        Design matrix; standardised internally.
    y : (n,) array
        Response (0/1 for the binomial family).
    family : {"gaussian", "binomial"}
    lam : float
        Positive penalty level.
    init : (m,) array, optional
        Warm start on the standardised scale.

    Returns
    -------
    LassoFit
        ``converged`` is False when the sweep budget ran out; callers must
        reject such fits.
    """
    design, y, family = _check_inputs(design, y, family)
    if not lam > 0:
        raise ValidationError(f"lambda must be positive, got {lam}")
    std = _Standardized(design)
    beta = np.zeros(design.shape[1]) if init is None else np.array(init, dtype=float)
    b0 = _null_intercept(y, family)
    b0, sweeps, ok = _solve(std, y, family, float(lam), beta, b0)
    return LassoFit(beta, b0, float(lam), sweeps, ok)


def _path(std: _Standardized, y: np.ndarray, family: Family, lambdas: np.ndarray,
          stop: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Warm-started path; returns coefficient matrix and intercepts."""
    stop = len(lambdas) if stop is None else stop
    m = std.x.shape[1]
    betas = np.zeros((stop, m))
    intercepts = np.zeros(stop)
    beta = np.zeros(m)
    b0 = _null_intercept(y, family)
    for i in range(stop):
        b0, _, ok = _solve(std, y, family, float(lambdas[i]), beta, b0)
        if not ok:
            raise NoConvergence(
                f"coordinate descent did not converge within {MAX_SWEEPS} sweeps "
                f"at lambda={lambdas[i]:.4g}")
        betas[i] = beta
        intercepts[i] = b0
    return betas, intercepts


def _heldout_loss(eta: np.ndarray, y: np.ndarray, family: Family) -> np.ndarray:
    """Mean held-out deviance for each column of linear predictors ``eta``."""
    if family is Family.GAUSSIAN:
        return np.mean((y[:, None] - eta) ** 2, axis=0)
    prob = np.clip(1 / (1 + np.exp(-eta)), 1e-10, 1 - 1e-10)
    ll = y[:, None] * np.log(prob) + (1 - y[:, None]) * np.log(1 - prob)
    return -2 * np.mean(ll, axis=0)


def fold_ids(n: int, folds: int, rng_seed: int) -> np.ndarray:
    """Fold label for each row from a seeded permutation of the row indices."""
    rng = np.random.default_rng(np.random.SeedSequence([int(rng_seed), 0xCF]))
    perm = rng.permutation(n)
    ids = np.empty(n, dtype=int)
    ids[perm] = np.arange(n) % folds
    return ids


def _cv_curve(design, y, family, folds, rng_seed):
    design, y, family = _check_inputs(design, y, family)
    n = y.size
    if not (2 <= folds <= n):
        raise ValidationError(f"need 2 <= folds <= n; got folds={folds}, n={n}")
    full = _Standardized(design)
    lambdas = lambda_grid(_lambda_max(full, y))
    ids = fold_ids(n, folds, rng_seed)
    losses = np.zeros((folds, lambdas.size))
    weights = np.zeros(folds)
    for f in range(folds):
        test = ids == f
        train = ~test
        std = _Standardized(design[train])
        betas, b0 = _path(std, y[train], family, lambdas)
        eta = std.apply(design[test]) @ betas.T + b0
        losses[f] = _heldout_loss(eta, y[test], family)
        weights[f] = test.sum()
    mean_loss = weights @ losses / weights.sum()
    return full, lambdas, mean_loss


def cross_validate_lambda(design, y, family="gaussian", folds: int = 5, rng_seed: int = 0) -> float:
    """Penalty minimising the mean held-out deviance over a K-fold split.

    The grid has 100 log-spaced values from ``max_j |x_j' y_c| / n`` down to
    0.001 of that; exact ties go to the larger penalty.
    """
    _, lambdas, mean_loss = _cv_curve(design, y, family, folds, rng_seed)
    return float(lambdas[int(np.argmin(mean_loss))])


def _split(beta: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    return np.abs(beta[:p]), np.abs(beta[p:])


def abs_coef_stats(exp: Experiment, kc: KnockoffCopy, rng_seed: int = 0,
                   folds: int = 5) -> ZStats:
    """``|beta_j|`` and ``|beta_{j+p}|`` at the cross-validated penalty."""
    design = design_for_statistics(exp.x, kc)
    return abs_coef_stats_design(design, exp.y, exp.family, rng_seed, folds)


def abs_coef_stats_design(design, y, family="gaussian", rng_seed: int = 0,
                          folds: int = 5) -> ZStats:
    """As :func:`abs_coef_stats`, on an already assembled ``[X Xt]``."""
    full, lambdas, mean_loss = _cv_curve(design, y, family, folds, rng_seed)
    best = int(np.argmin(mean_loss))
    y = np.asarray(y, dtype=float).ravel()
    betas, _ = _path(full, y, Family.parse(family), lambdas, stop=best + 1)
    p = design.shape[1] // 2
    z, zt = _split(betas[best], p)
    return ZStats(z, zt, float(lambdas[best]), StatisticKind.ABS_COEF)


def path_entry_stats(exp: Experiment, kc: KnockoffCopy) -> ZStats:
    """Largest grid penalty at which each coordinate is nonzero (0 if never)."""
    design = design_for_statistics(exp.x, kc)
    return path_entry_stats_design(design, exp.y, exp.family)


def path_entry_stats_design(design, y, family="gaussian") -> ZStats:
    design, y, family = _check_inputs(design, y, family)
    std = _Standardized(design)
    lambdas = lambda_grid(_lambda_max(std, y))
    betas, _ = _path(std, y, family, lambdas)
    nonzero = betas != 0
    entered = nonzero.any(axis=0)
    first = np.argmax(nonzero, axis=0)
    entry = np.where(entered, lambdas[first], 0.0)
    p = design.shape[1] // 2
    return ZStats(entry[:p], entry[p:], float(lambdas[-1]), StatisticKind.PATH_ENTRY)


def kkt_residual(design, y, fit: LassoFit) -> float:
    """Largest violation of the Gaussian lasso optimality conditions."""
    std = _Standardized(np.asarray(design, dtype=float))
    y = np.asarray(y, dtype=float)
    grad = std.x.T @ (y - y.mean() - std.x @ fit.coefficients) / std.n
    b = fit.coefficients
    zero = b == 0
    viol_zero = np.maximum(np.abs(grad[zero]) - fit.lam, 0.0)
    viol_nz = np.abs(grad[~zero] - fit.lam * np.sign(b[~zero]))
    return float(max(viol_zero.max(initial=0.0), viol_nz.max(initial=0.0)))
