"""
The simultaneous knockoff pipeline and the two comparison pipelines
(pooled data, intersection of per-study selections).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .combiners import CombinerSpec, FilterStats, combine, flip_sign_diff
from .errors import ColumnMismatch, DimensionMismatch, FamilyMismatch, ValidationError
from .filter import SelectionReport, select
from .knockoffs import Construction, DesignMatrix, GaussianModel, construct
from .stats import Experiment, Family, ZStats, abs_coef_stats


class Method(str, enum.Enum):
    SIMULTANEOUS = "simultaneous"
    POOLING = "pooling"
    INTERSECTION = "intersection"

    @classmethod
    def parse(cls, value: "str | Method") -> "Method":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ValidationError(f"unknown method {value!r}; valid names: {valid}") from None


@dataclass(frozen=True)
class MethodResult:
    method: Method
    report: "SelectionReport | list[SelectionReport]"
    selected: tuple
    stats: list = field(default_factory=list, compare=False, repr=False)


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 63-bit child seed of ``seed`` indexed by nonnegative integer ``keys``.

    The key count is part of the entropy because SeedSequence ignores
    trailing zeros, which would make ``(s, r)`` and ``(s, r, 0)`` collide.
    """
    ss = np.random.SeedSequence([int(seed) % (1 << 63), len(keys), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


_KNOCKOFF_KEY, _CV_KEY = 1, 2


def default_construction(family: "str | Family") -> Construction:
    """Fixed-X for continuous outcomes, second-order Model-X for binary ones."""
    if Family.parse(family) is Family.GAUSSIAN:
        return Construction.FIXED_X
    return Construction.SECOND_ORDER


def check_columns(exps: Sequence[Experiment]) -> tuple:
    if not exps:
        raise ValidationError("need at least one experiment")
    names = exps[0].x.column_names
    for k, exp in enumerate(exps[1:], start=2):
        if exp.x.column_names != names:
            raise ColumnMismatch(
                f"study {k} has columns that differ from study 1 "
                f"({exp.p} vs {len(names)} features or different names/order)")
    return names


def _broadcast(value, k: int, what: str) -> list:
    if value is None or isinstance(value, (str, enum.Enum, GaussianModel)):
        return [value] * k
    value = list(value)
    if len(value) == 1:
        return value * k
    if len(value) != k:
        raise DimensionMismatch(f"expected 1 or {k} {what}, got {len(value)}")
    return value


def study_stats(exp: Experiment, construction=None, rng_seed: int = 0, index: int = 0,
                model: GaussianModel | None = None, folds: int = 5) -> ZStats:
    """Knockoffs plus cross-validated lasso statistics for one study.

    Seeds for the knockoff sampler and the fold split are derived from
    ``(rng_seed, index)``, so the same study index always sees the same
    randomness regardless of which pipeline calls it.
    """
    method = default_construction(exp.family) if construction is None else Construction.parse(construction)
    kc = construct(exp.x, method, derive_seed(rng_seed, index, _KNOCKOFF_KEY), model=model)
    return abs_coef_stats(exp, kc, derive_seed(rng_seed, index, _CV_KEY), folds=folds)


def all_study_stats(exps, constructions=None, rng_seed: int = 0, models=None) -> list[ZStats]:
    exps = list(exps)
    check_columns(exps)
    cons = _broadcast(constructions, len(exps), "constructions")
    mods = _broadcast(models, len(exps), "models")
    return [study_stats(e, c, rng_seed, k, m) for k, (e, c, m) in enumerate(zip(exps, cons, mods))]


def run_simultaneous(exps: Sequence[Experiment], constructions=None,
                     spec: "str | CombinerSpec" = CombinerSpec.PRODUCT_DIFF,
                     q: float = 0.2, plus: bool = True, rng_seed: int = 0,
                     models=None, stats: list[ZStats] | None = None) -> MethodResult:
    """Simultaneous knockoffs across K studies sharing one feature set.

    Each study gets its own knockoffs and lasso statistics; the K pairs are
    combined with ``spec`` and thresholded with the (plus) knockoff filter.
    Pass ``stats`` to reuse per-study statistics already computed with the
    same seed.
    """
    exps = list(exps)
    check_columns(exps)
    if stats is None:
        stats = all_study_stats(exps, constructions, rng_seed, models)
    report = select(combine(stats, spec), q, plus)
    return MethodResult(Method.SIMULTANEOUS, report, report.selected, list(stats))


def pool_experiments(exps: Sequence[Experiment], force_continuous: bool = False) -> Experiment:
    """Row-concatenate the studies into a single experiment.

    With ``force_continuous`` every response is standardised to mean 0 and
    variance 1 and the pooled study is treated as Gaussian, which is the only
    way mixed continuous/binary studies are pooled.
    """
    exps = list(exps)
    names = check_columns(exps)
    families = {e.family for e in exps}
    if force_continuous:
        ys = []
        for e in exps:
            sd = e.y.std()
            ys.append((e.y - e.y.mean()) / (sd if sd > 0 else 1.0))
        family = Family.GAUSSIAN
    else:
        if len(families) != 1:
            raise FamilyMismatch(
                "cannot pool studies with different outcome families "
                f"({sorted(f.value for f in families)}); set force_continuous to standardise")
        ys = [e.y for e in exps]
        family = exps[0].family
    x = DesignMatrix(np.vstack([e.x.values for e in exps]), names)
    return Experiment(np.concatenate(ys), x, family)


def run_pooling(exps: Sequence[Experiment], q: float = 0.2, plus: bool = True,
                rng_seed: int = 0, construction=None, force_continuous: bool = False,
                model: GaussianModel | None = None) -> MethodResult:
    """Single knockoff analysis of the row-concatenated data with ``w = z - zt``."""
    pooled = pool_experiments(exps, force_continuous)
    zs = study_stats(pooled, construction, rng_seed, 0, model)
    report = select(FilterStats(flip_sign_diff(zs.z, zs.ztilde)), q, plus)
    return MethodResult(Method.POOLING, report, report.selected, [zs])


def run_intersection(exps: Sequence[Experiment], constructions=None, q: float = 0.2,
                     plus: bool = True, rng_seed: int = 0, models=None,
                     stats: list[ZStats] | None = None) -> MethodResult:
    """Per-study knockoff selections at the same q, intersected."""
    exps = list(exps)
    check_columns(exps)
    if stats is None:
        stats = all_study_stats(exps, constructions, rng_seed, models)
    reports = [select(FilterStats(flip_sign_diff(s.z, s.ztilde)), q, plus) for s in stats]
    common = set(reports[0].selected)
    for r in reports[1:]:
        common &= set(r.selected)
    return MethodResult(Method.INTERSECTION, reports, tuple(sorted(common)), list(stats))


def run_method(method: "str | Method", exps, constructions=None,
               spec: "str | CombinerSpec" = CombinerSpec.PRODUCT_DIFF, q: float = 0.2,
               plus: bool = True, rng_seed: int = 0, force_continuous: bool = False,
               stats: list[ZStats] | None = None) -> MethodResult:
    """Dispatch by method name; ``stats`` is only used by the per-study methods."""
    method = Method.parse(method)
    if method is Method.SIMULTANEOUS:
        return run_simultaneous(exps, constructions, spec, q, plus, rng_seed, stats=stats)
    if method is Method.INTERSECTION:
        return run_intersection(exps, constructions, q, plus, rng_seed, stats=stats)
    pooled_construction = None
    cons = _broadcast(constructions, len(list(exps)), "constructions")
    if len({c for c in cons}) == 1 and cons[0] is not None and not force_continuous:
        pooled_construction = cons[0]
    return run_pooling(exps, q, plus, rng_seed, pooled_construction, force_continuous)
