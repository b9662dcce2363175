"""
Synthetic multi-study data and a Monte-Carlo harness estimating FDR and
power of the selection methods.

Coefficient layout (K=2)::

    beta^1 = (eta_0, eta_1, 0,     0...) * eps
    beta^2 = (eta_0, 0,     eta_2, 0...) * eps

For K=3 the mutual and per-study blocks are followed by the pairwise blocks
(12, 13, 23). ``eps`` is a Rademacher vector shared by all studies.
"""
from __future__ import annotations

import enum
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import linalg
from scipy import stats as sps

from .baselines import (
    Method,
    all_study_stats,
    default_construction,
    derive_seed,
    run_intersection,
    run_pooling,
    run_simultaneous,
)
from .combiners import CombinerSpec
from .errors import (
    BlockOverflow,
    InvalidQ,
    InvalidRho,
    NumericalError,
    ValidationError,
)
from .knockoffs import DesignMatrix
from .stats import Experiment, Family

log = logging.getLogger(__name__)

THREADS_ENV = "SIMKNOCK_THREADS"
MAX_FAILURE_RATE = 0.05


class Scenario(str, enum.Enum):
    SHARED_STRENGTH = "shared"
    INDEPENDENT_STRENGTH = "independent"


class Setting(str, enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"
    MIXED = "mixed"


def _tuple(value, k: int, cast=float) -> tuple:
    if np.ndim(value) == 0:
        return (cast(value),) * k
    value = tuple(cast(v) for v in value)
    if len(value) == 1:
        return value * k
    return value


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one simulation setting.

    Per-study fields (``n``, ``s_solo``, ``rho``, ``sigma``, ``alpha``) accept
    a scalar, which is broadcast to every study. ``s_pair`` holds the
    pairwise-only counts ``(s12, s13, s23)`` and must be zero unless K=3.
    ``mutual_amplitude`` overrides the amplitude of the mutual block only.
    """

    K: int = 2
    n: tuple = 400
    p: int = 50
    s0: int = 10
    s_solo: tuple = 0
    s_pair: tuple = (0, 0, 0)
    rho: tuple = 0.5
    sigma: tuple = 1.0
    alpha: tuple = 0.0
    amplitude: float = 1.2
    mutual_amplitude: float | None = None
    scenario: Scenario = Scenario.SHARED_STRENGTH
    setting: Setting = Setting.CONTINUOUS
    q: float = 0.2
    plus: bool = True
    replicates: int = 100
    seed: int = 0
    fixed_truth: bool = False

    def __post_init__(self):
        k = int(self.K)
        if k not in (2, 3):
            raise ValidationError(f"K must be 2 or 3, got {self.K}")
        object.__setattr__(self, "K", k)
        for name, cast in (("n", int), ("s_solo", int), ("rho", float),
                           ("sigma", float), ("alpha", float)):
            value = _tuple(getattr(self, name), k, cast)
            if len(value) != k:
                raise ValidationError(f"{name} needs 1 or {k} values, got {len(value)}")
            object.__setattr__(self, name, value)
        pair = _tuple(self.s_pair, 3, int)
        if len(pair) != 3:
            raise ValidationError(f"s_pair needs 3 values (s12, s13, s23), got {len(pair)}")
        if k == 2 and any(pair):
            raise ValidationError("pairwise-only signal counts require K=3")
        object.__setattr__(self, "s_pair", pair)
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "setting", Setting(self.setting))
        if self.setting is Setting.MIXED and k != 2:
            raise ValidationError("the mixed setting is defined for K=2 only")
        counts = (self.s0, *self.s_solo, *self.s_pair)
        if any(c < 0 for c in counts):
            raise ValidationError("signal counts must be nonnegative")
        if sum(counts) > self.p:
            raise BlockOverflow(
                f"s0 + sum(s_solo) + sum(s_pair) = {sum(counts)} exceeds p = {self.p}")
        if not 0 < self.q < 1:
            raise InvalidQ(f"q must lie in (0, 1), got {self.q}")
        if any(abs(r) >= 1 for r in self.rho):
            raise InvalidRho(f"AR(1) parameters must satisfy |rho| < 1, got {self.rho}")
        if any(s < 0 for s in self.sigma):
            raise ValidationError("noise standard deviations must be nonnegative")
        if any(n < 1 for n in self.n) or self.p < 1:
            raise ValidationError("sample sizes and p must be positive")
        if self.amplitude < 0 or (self.mutual_amplitude is not None and self.mutual_amplitude < 0):
            raise ValidationError("amplitudes must be nonnegative")
        if self.replicates < 1:
            raise ValidationError(f"replicates must be >= 1, got {self.replicates}")

    @property
    def families(self) -> list[Family]:
        if self.setting is Setting.CONTINUOUS:
            return [Family.GAUSSIAN] * self.K
        if self.setting is Setting.BINARY:
            return [Family.BINOMIAL] * self.K
        return [Family.GAUSSIAN, Family.BINOMIAL]

    @property
    def constructions(self) -> list:
        return [default_construction(f) for f in self.families]


@dataclass(frozen=True)
class TruthTable:
    betas: np.ndarray
    mutual_set: tuple
    per_study_null_sets: tuple

    @property
    def union_null_set(self) -> tuple:
        mutual = set(self.mutual_set)
        return tuple(j for j in range(self.betas.shape[1]) if j not in mutual)

    @classmethod
    def from_betas(cls, betas) -> "TruthTable":
        betas = np.atleast_2d(np.asarray(betas, dtype=float))
        nonzero = betas != 0
        mutual = tuple(int(j) for j in np.flatnonzero(nonzero.all(axis=0)))
        nulls = tuple(tuple(int(j) for j in np.flatnonzero(~row)) for row in nonzero)
        return cls(betas, mutual, nulls)


@dataclass
class MCResult:
    method: Method
    fdr_hat: float
    fdr_se: float
    power_hat: float
    power_se: float
    replicates_run: int
    failures: int = 0
    fdp: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    power: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)


def ar1_covariance(p: int, rho: float) -> np.ndarray:
    """Covariance with entries ``rho ** |i - j|``."""
    if not abs(rho) < 1:
        raise InvalidRho(f"|rho| must be < 1, got {rho}")
    idx = np.arange(p)
    return float(rho) ** np.abs(idx[:, None] - idx[None, :])


def gen_coefficients(cfg: SimConfig, rng: np.random.Generator) -> TruthTable:
    """Draw the K coefficient vectors in the block layout of the setting."""
    k, p = cfg.K, cfg.p
    amp = cfg.amplitude
    mutual_amp = amp if cfg.mutual_amplitude is None else cfg.mutual_amplitude
    if cfg.scenario is Scenario.SHARED_STRENGTH:
        eta0 = np.tile(rng.uniform(0, mutual_amp, cfg.s0), (k, 1))
    else:
        eta0 = rng.uniform(0, mutual_amp, (k, cfg.s0))
    solo = [rng.uniform(0, amp, s) for s in cfg.s_solo]
    pair_members = [(0, 1), (0, 2), (1, 2)] if k == 3 else []
    pairs = [rng.uniform(0, amp, s) for s in cfg.s_pair] if k == 3 else []
    eps = rng.choice(np.array([-1.0, 1.0]), size=p)

    betas = np.zeros((k, p))
    betas[:, :cfg.s0] = eta0
    start = cfg.s0
    for kk, block in enumerate(solo):
        betas[kk, start:start + block.size] = block
        start += block.size
    for members, block in zip(pair_members, pairs):
        for kk in members:
            betas[kk, start:start + block.size] = block
        start += block.size
    return TruthTable.from_betas(betas * eps)


def gen_experiments(cfg: SimConfig, truth: TruthTable, rng: np.random.Generator) -> list[Experiment]:
    """Draw the K studies given the coefficients."""
    exps = []
    names = tuple(f"x{j + 1}" for j in range(cfg.p))
    for kk in range(cfg.K):
        n = cfg.n[kk]
        chol = linalg.cholesky(ar1_covariance(cfg.p, cfg.rho[kk]), lower=True)
        x = rng.standard_normal((n, cfg.p)) @ chol.T
        lin = x @ truth.betas[kk]
        family = cfg.families[kk]
        if cfg.setting is Setting.BINARY:
            prob = 1 / (1 + np.exp(-(cfg.alpha[kk] + lin)))
            y = (rng.uniform(size=n) < prob).astype(float)
        else:
            y = lin + cfg.sigma[kk] * rng.standard_normal(n)
            if family is Family.BINOMIAL:
                y = (y >= 0).astype(float)
        exps.append(Experiment(y, DesignMatrix(x, names), family))
    return exps


def fdp_and_power(selected: Sequence[int], truth: TruthTable) -> tuple[float, float]:
    """False discovery proportion against the union nulls, and power (0 when no signals)."""
    sel = set(selected)
    mutual = set(truth.mutual_set)
    false = len(sel - mutual)
    fdp = false / max(len(sel), 1)
    power = len(sel & mutual) / len(mutual) if mutual else 0.0
    return fdp, power


def replicate_data(cfg: SimConfig, r: int) -> tuple[TruthTable, list[Experiment], int]:
    """Truth, data and pipeline seed for replicate ``r``."""
    seed_r = derive_seed(cfg.seed, r)
    rng = np.random.default_rng(seed_r)
    if cfg.fixed_truth:
        # two keys, so never equal to a replicate seed
        truth = gen_coefficients(cfg, np.random.default_rng(derive_seed(cfg.seed, 0, 0)))
    else:
        truth = gen_coefficients(cfg, rng)
    return truth, gen_experiments(cfg, truth, rng), seed_r


def run_replicate(cfg: SimConfig, r: int, methods: Sequence, spec) -> dict:
    """Selections for every method on replicate ``r``; failures map to ``None``."""
    truth, exps, seed_r = replicate_data(cfg, r)
    methods = [Method.parse(m) for m in methods]
    out = {}
    stats = None
    if Method.SIMULTANEOUS in methods or Method.INTERSECTION in methods:
        try:
            stats = all_study_stats(exps, cfg.constructions, seed_r)
        except NumericalError as exc:
            log.warning("replicate %d: per-study statistics failed: %s", r, exc)
    for m in methods:
        try:
            if m is Method.POOLING:
                res = run_pooling(exps, cfg.q, cfg.plus, seed_r,
                                  force_continuous=cfg.setting is Setting.MIXED)
            elif stats is None:
                out[m] = None
                continue
            elif m is Method.SIMULTANEOUS:
                res = run_simultaneous(exps, cfg.constructions, spec, cfg.q, cfg.plus,
                                       seed_r, stats=stats)
            else:
                res = run_intersection(exps, cfg.constructions, cfg.q, cfg.plus,
                                       seed_r, stats=stats)
        except NumericalError as exc:
            log.warning("replicate %d, %s failed: %s", r, m.value, exc)
            out[m] = None
            continue
        out[m] = (res.selected, *fdp_and_power(res.selected, truth))
    return out


def _replicate_job(args):
    cfg, r, methods, spec = args
    return run_replicate(cfg, r, methods, spec)


def n_workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_grid(cfg: SimConfig, methods: Sequence = tuple(Method),
             spec: "str | CombinerSpec" = CombinerSpec.PRODUCT_DIFF,
             workers: int | None = None) -> list[MCResult]:
    """Monte-Carlo FDR and power over ``cfg.replicates`` replicates.

    Replicate ``r`` draws everything from a seed derived from
    ``(cfg.seed, r)``, so the result does not depend on ``workers``.
    Failed replicates are dropped and counted; more than 5% failures for a
    method raises :class:`NumericalError`.
    """
    methods = [Method.parse(m) for m in methods]
    spec = CombinerSpec.parse(spec)
    jobs = [(cfg, r, methods, spec) for r in range(cfg.replicates)]
    workers = n_workers() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_replicate_job, jobs))
    else:
        outcomes = [_replicate_job(j) for j in jobs]

    results = []
    for m in methods:
        rows = [o[m] for o in outcomes if o.get(m) is not None]
        failures = cfg.replicates - len(rows)
        if failures > MAX_FAILURE_RATE * cfg.replicates:
            raise NumericalError(
                f"{failures} of {cfg.replicates} replicates failed for {m.value}")
        fdp = np.array([row[1] for row in rows])
        power = np.array([row[2] for row in rows])
        results.append(MCResult(m, *_mean_se(fdp), *_mean_se(power), len(rows),
                                failures, fdp, power))
    return results


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    if values.size == 0:
        return float("nan"), float("nan")
    se = values.std(ddof=1) / np.sqrt(values.size) if values.size > 1 else 0.0
    return float(values.mean()), float(se)


def null_filter_statistics(cfg: SimConfig, spec="product-diff") -> np.ndarray:
    """Filter vectors ``w`` (replicates x p) from the simultaneous pipeline."""
    out = []
    for r in range(cfg.replicates):
        truth, exps, seed_r = replicate_data(cfg, r)
        res = run_simultaneous(exps, cfg.constructions, spec, cfg.q, cfg.plus, seed_r)
        out.append(res.report.w.w)
    return np.array(out)


def sign_symmetry_pvalue(w) -> tuple[float, int, int]:
    """Two-sided exact binomial test that nonzero entries are positive w.p. 1/2.

    Returns ``(p_value, n_positive, n_nonzero)``.
    """
    w = np.asarray(w, dtype=float).ravel()
    nz = w[w != 0]
    if nz.size == 0:
        return 1.0, 0, 0
    pos = int(np.sum(nz > 0))
    return float(sps.binomtest(pos, nz.size, 0.5).pvalue), pos, int(nz.size)


def config_dict(cfg: SimConfig) -> dict:
    d = asdict(cfg)
    d["scenario"] = cfg.scenario.value
    d["setting"] = cfg.setting.value
    return d


def make_fixture(seed: int = 2024, n: int = 60, p: int = 5, amplitude: float = 5.0,
                 signal: int = 0) -> list[Experiment]:
    """Two small Gaussian studies sharing one planted signal of size ``amplitude``."""
    cfg = SimConfig(K=2, n=n, p=p, s0=1, s_solo=0, rho=0.0, sigma=1.0,
                    amplitude=amplitude, replicates=1, seed=seed)
    betas = np.zeros((2, p))
    betas[:, signal] = amplitude
    truth = TruthTable.from_betas(betas)
    return gen_experiments(cfg, truth, np.random.default_rng(seed))


def with_overrides(cfg: SimConfig, **kwargs) -> SimConfig:
    return replace(cfg, **kwargs)
