"""
Knockoff constructions for a single design matrix.

Three samplers are provided:

* ``construct_fixed_x`` builds a deterministic-design knockoff satisfying the
  Gram identities ``Xt'Xt = X'X`` and ``Xt'X = X'X - diag(s)`` on the
  column-normalised design.
* ``construct_model_x_gaussian`` samples ``Xt | X`` from the Gaussian
  conditional law implied by a known mean and covariance.
* ``construct_second_order`` estimates (and shrinks) the first two moments
  from the data and then delegates to the Gaussian sampler.

The calibration vector ``s`` always comes from the equicorrelated closed form.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, special

from .errors import (
    DegenerateColumns,
    DimensionMismatch,
    InsufficientRows,
    NonPositiveDefinite,
    RankDeficient,
    ValidationError,
)

S_SHRINK = 1e-6
PSD_ABORT_TOL = -1e-6


class Construction(str, enum.Enum):
    FIXED_X = "fixed-x"
    MODEL_X_GAUSSIAN = "model-x-gaussian"
    SECOND_ORDER = "second-order"

    @classmethod
    def parse(cls, value: "str | Construction") -> "Construction":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"fixed": "fixed-x", "gaussian": "model-x-gaussian",
                   "second": "second-order", "model-x-second-order": "second-order"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ValidationError(
                f"unknown construction {value!r}; valid names: {valid}") from None


@dataclass(frozen=True)
class DesignMatrix:
    """An ``n x p`` feature matrix with unique column names."""

    values: np.ndarray
    column_names: tuple = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValidationError(f"design must be a non-empty 2-d array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("design contains non-finite entries")
        names = tuple(self.column_names) or tuple(f"x{j + 1}" for j in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise DimensionMismatch(
                f"{len(names)} column names for {values.shape[1]} columns")
        if len(set(names)) != len(names):
            raise ValidationError("column names must be unique")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_names", tuple(str(c) for c in names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def as_design(x) -> DesignMatrix:
    return x if isinstance(x, DesignMatrix) else DesignMatrix(x)


@dataclass(frozen=True)
class GaussianModel:
    """Mean vector and covariance matrix of a multivariate normal feature law."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise DimensionMismatch(
                f"mean of length {mean.size} incompatible with covariance of shape {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValidationError("Gaussian model contains non-finite entries")
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-10:
            raise ValidationError("covariance is not symmetric within 1e-10")
        cov = (cov + cov.T) / 2
        if np.linalg.eigvalsh(cov)[0] <= 0:
            raise NonPositiveDefinite("covariance is not positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def p(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class KnockoffCopy:
    """Knockoff matrix together with the calibration used to build it.

    For the Fixed-X construction ``xtilde`` lives on the column-normalised
    scale of ``x`` (see :func:`normalize_columns`).
    """

    xtilde: np.ndarray
    s: np.ndarray
    method: Construction
    sigma_used: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)


def normalize_columns(x) -> tuple[np.ndarray, np.ndarray]:
    """Scale every column to unit Euclidean norm; returns ``(x_scaled, norms)``."""
    x = np.asarray(x, dtype=float)
    norms = np.sqrt(np.sum(x * x, axis=0))
    if np.any(norms <= 0):
        raise RankDeficient("design has an all-zero column")
    return x / norms, norms


def equicorrelated_s(sigma) -> np.ndarray:
    """Equicorrelated calibration vector for a correlation matrix.

    Every entry equals ``min(2 * lambda_min(sigma), 1) * (1 - 1e-6)``.

    Parameters
    ----------
    sigma : (p, p) array
        Symmetric, unit-diagonal, positive definite matrix.

    Returns
    -------
    s : (p,) array

    Examples
    --------
    >>> equicorrelated_s([[1.0, 0.8], [0.8, 1.0]])
    array([0.39999996, 0.39999996])
    """
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    if sigma.shape[0] != sigma.shape[1]:
        raise DimensionMismatch(f"sigma must be square, got {sigma.shape}")
    lam_min = np.linalg.eigvalsh((sigma + sigma.T) / 2)[0]
    if lam_min <= 1e-12:
        raise NonPositiveDefinite(f"smallest eigenvalue {lam_min:.3g} is not positive")
    value = min(2.0 * lam_min, 1.0) * (1.0 - S_SHRINK)
    return np.full(sigma.shape[0], value)


def _psd_factor(mat: np.ndarray) -> np.ndarray:
    """Return ``C`` with ``C'C = mat``, clipping tiny negative eigenvalues at 0."""
    mat = (mat + mat.T) / 2
    evals, evecs = np.linalg.eigh(mat)
    if evals[0] < PSD_ABORT_TOL:
        raise NonPositiveDefinite(
            f"2 diag(s) - diag(s) Sigma^-1 diag(s) has eigenvalue {evals[0]:.3g}")
    evals = np.clip(evals, 0.0, None)
    return np.sqrt(evals)[:, None] * evecs.T


def _lower_factor(mat: np.ndarray) -> np.ndarray:
    """Lower factor ``L`` with ``L L' = mat``; eigen-clipped repair if Cholesky fails."""
    mat = (mat + mat.T) / 2
    try:
        return linalg.cholesky(mat, lower=True)
    except linalg.LinAlgError:
        return _psd_factor(mat).T


def row_normals(seed: int, n: int, p: int, start: int = 0) -> np.ndarray:
    """Standard normals for rows ``start .. start+n-1`` of a counter-based stream.

    Row ``i`` owns the Philox counter block ``[i*b, (i+1)*b)`` with
    ``b = ceil(p / 4)`` (each counter step yields four 64-bit words), so any
    block of rows can be regenerated independently of how the rows are split
    across workers.
    """
    b = -(-p // 4)
    bitgen = np.random.Philox(key=int(seed) % (1 << 64))
    if start:
        bitgen.advance(start * b)
    words = bitgen.random_raw(n * 4 * b).reshape(n, 4 * b)[:, :p]
    u = (words >> np.uint64(11)).astype(float) * 2.0 ** -53
    return special.ndtri(u + 2.0 ** -54)


def _complement_basis(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Random ``n x k`` orthonormal basis orthogonal to the columns of ``x``."""
    n, p = x.shape
    q, _ = np.linalg.qr(x)
    g = rng.standard_normal((n, k))
    g -= q @ (q.T @ g)
    g -= q @ (q.T @ g)
    u, _ = np.linalg.qr(g)
    return u


def construct_fixed_x(x, rng_seed: int = 0) -> KnockoffCopy:
    """Fixed-X knockoffs for a design with ``n >= 2p``.

    The design is normalised to unit column norms, ``s`` is the
    equicorrelated vector of the resulting Gram matrix and

    ``Xt = X (I - G^-1 diag(s)) + U C``

    where ``U`` spans a random (seeded) subspace orthogonal to ``col(X)`` and
    ``C'C = 2 diag(s) - diag(s) G^-1 diag(s)``.
    """
    x = as_design(x)
    n, p = x.values.shape
    if n < 2 * p:
        raise InsufficientRows(f"Fixed-X knockoffs need n >= 2p rows; got n={n}, p={p}")
    xn, _ = normalize_columns(x.values)
    if np.linalg.svd(xn, compute_uv=False)[-1] <= 1e-10:
        raise RankDeficient("design does not have full column rank")
    gram = xn.T @ xn
    gram = (gram + gram.T) / 2
    s = equicorrelated_s(gram)
    gram_inv_s = linalg.solve(gram, np.diag(s), assume_a="pos")
    c = _psd_factor(2 * np.diag(s) - np.diag(s) @ gram_inv_s)
    rng = np.random.default_rng(np.random.SeedSequence([int(rng_seed), 0x5F1C]))
    u = _complement_basis(xn, p, rng)
    xtilde = xn - xn @ gram_inv_s + u @ c
    return KnockoffCopy(xtilde, s, Construction.FIXED_X, gram,
                        meta={"rng_seed": int(rng_seed)})


def construct_model_x_gaussian(x, model: GaussianModel, rng_seed: int = 0) -> KnockoffCopy:
    """Sample Gaussian Model-X knockoffs given the true feature law.

    Rows are drawn independently from ``N(mu_i, V)`` with

    ``mu_i = x_i - (x_i - m) Sigma^-1 diag(s)`` and
    ``V = 2 diag(s) - diag(s) Sigma^-1 diag(s)``.
    """
    x = as_design(x)
    if model.p != x.p:
        raise DimensionMismatch(f"model has {model.p} features, design has {x.p}")
    sigma = model.covariance
    sd = np.sqrt(np.diag(sigma))
    s = equicorrelated_s(sigma / np.outer(sd, sd)) * sd ** 2
    sigma_inv_s = linalg.solve(sigma, np.diag(s), assume_a="pos")
    v = 2 * np.diag(s) - np.diag(s) @ sigma_inv_s
    if np.linalg.eigvalsh((v + v.T) / 2)[0] < PSD_ABORT_TOL:
        raise NonPositiveDefinite("conditional covariance of the knockoffs is not PSD")
    chol = _lower_factor(v)
    centered = x.values - model.mean
    mu = x.values - centered @ sigma_inv_s
    z = row_normals(rng_seed, x.n, x.p)
    xtilde = mu + z @ chol.T
    return KnockoffCopy(xtilde, s, Construction.MODEL_X_GAUSSIAN, sigma,
                        meta={"rng_seed": int(rng_seed), "mean": model.mean})


def shrunk_covariance(x: np.ndarray) -> tuple[np.ndarray, float]:
    """Sample covariance shrunk towards its diagonal by ``min(1, 0.5 p / n)``."""
    n, p = x.shape
    cov = np.atleast_2d(np.cov(x, rowvar=False))
    gamma = min(1.0, 0.5 * p / n)
    shrunk = (1 - gamma) * cov + gamma * np.diag(np.diag(cov))
    return shrunk, gamma


def construct_second_order(x, rng_seed: int = 0) -> KnockoffCopy:
    """Second-order Model-X knockoffs from estimated, shrunk moments."""
    x = as_design(x)
    if x.n < 10:
        raise ValidationError(f"second-order knockoffs need at least 10 rows; got {x.n}")
    var = np.var(x.values, axis=0)
    flat = np.flatnonzero(var <= 1e-14 * np.maximum(1.0, np.mean(x.values ** 2, axis=0)))
    if flat.size:
        names = ", ".join(x.column_names[j] for j in flat[:5])
        raise DegenerateColumns(f"zero-variance column(s): {names}")
    cov, gamma = shrunk_covariance(x.values)
    model = GaussianModel(x.values.mean(axis=0), cov)
    kc = construct_model_x_gaussian(x, model, rng_seed)
    return KnockoffCopy(kc.xtilde, kc.s, Construction.SECOND_ORDER, kc.sigma_used,
                        meta={**kc.meta, "shrinkage": gamma})


def construct(x, method: "str | Construction", rng_seed: int = 0,
              model: GaussianModel | None = None) -> KnockoffCopy:
    """Dispatch to the construction named by ``method``."""
    method = Construction.parse(method)
    if method is Construction.FIXED_X:
        return construct_fixed_x(x, rng_seed)
    if method is Construction.SECOND_ORDER:
        return construct_second_order(x, rng_seed)
    if model is None:
        raise ValidationError("model-x-gaussian construction requires a GaussianModel")
    return construct_model_x_gaussian(x, model, rng_seed)


def design_for_statistics(x, kc: KnockoffCopy) -> np.ndarray:
    """Augmented ``[X Xt]`` on the scale the knockoffs were built on."""
    values = as_design(x).values
    if kc.method is Construction.FIXED_X:
        values, _ = normalize_columns(values)
    if kc.xtilde.shape != values.shape:
        raise DimensionMismatch(
            f"knockoff shape {kc.xtilde.shape} does not match design {values.shape}")
    return np.hstack([values, kc.xtilde])


def psd_condition_min_eig(s: Sequence[float], sigma) -> float:
    """Smallest eigenvalue of ``2 diag(s) - diag(s) sigma^-1 diag(s)``."""
    s = np.asarray(s, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    d = np.diag(s)
    mat = 2 * d - d @ np.linalg.solve(sigma, d)
    return float(np.linalg.eigvalsh((mat + mat.T) / 2)[0])
