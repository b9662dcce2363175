"""
Maps from K per-study statistic pairs ``(z^k, zt^k)`` to one filter vector
``w`` whose signs flip on exactly the coordinates where any single study's
pair is swapped.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, KTooLarge, ValidationError

MAX_K = 20


class CombinerSpec(str, enum.Enum):
    PRODUCT_DIFF = "product-diff"
    OSCF_DIFF = "oscf-diff"
    OSCF_MAX = "oscf-max"
    DIRECT_MAX_SUM = "direct-max-sum"
    DIRECT_MAX_MAX = "direct-max-max"
    DIRECT_DIFF_SUM = "direct-diff-sum"
    DIRECT_DIFF_MAX = "direct-diff-max"
    DIRECT_SUM_SUM = "direct-sum-sum"
    DIRECT_SUM_MAX = "direct-sum-max"

    @property
    def kind(self) -> str:
        return self.value

    @classmethod
    def parse(cls, value: "str | CombinerSpec") -> "CombinerSpec":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-").replace(" ", "-")
        try:
            return cls(key)
        except ValueError:
            valid = ", ".join(c.value for c in cls)
            raise ValidationError(f"unknown combiner {value!r}; valid names: {valid}") from None


@dataclass(frozen=True)
class FilterStats:
    w: np.ndarray
    combiner: CombinerSpec | None = None


def _as_pairs(pairs) -> tuple[np.ndarray, np.ndarray]:
    """Stack a sequence of ``(z, zt)`` pairs (or ZStats) into two K x p arrays."""
    zs, zts = [], []
    for pair in pairs:
        if hasattr(pair, "ztilde"):
            z, zt = pair.z, pair.ztilde
        else:
            z, zt = pair
        zs.append(np.atleast_1d(np.asarray(z, dtype=float)))
        zts.append(np.atleast_1d(np.asarray(zt, dtype=float)))
    if not zs:
        raise ValidationError("need at least one statistic pair")
    lengths = {a.shape for a in zs + zts}
    if len(lengths) != 1 or len(next(iter(lengths))) != 1:
        raise DimensionMismatch(f"statistic vectors have inconsistent shapes {sorted(lengths)}")
    return np.vstack(zs), np.vstack(zts)


def oscf_even_odd(pairs) -> tuple[np.ndarray, np.ndarray]:
    """Parity combination of K statistic pairs into one pair.

    ``zc_j`` sums, over every way of picking either ``z`` or ``zt`` from each
    study, the product of the picks that use an even number of ``zt``
    entries; ``zc_tilde_j`` collects the odd ones. For K=2 this is
    ``zc = z1 z2 + zt1 zt2`` and ``zc_tilde = z1 zt2 + zt1 z2``.

    The sum is evaluated with the O(K) recursion
    ``(E, O) <- (E z + O zt, E zt + O z)``, which makes swapping a study's
    pair swap the outputs bit-for-bit.
    """
    z, zt = _as_pairs(pairs)
    k = z.shape[0]
    if k > MAX_K:
        raise KTooLarge(f"K={k} exceeds the supported maximum of {MAX_K} studies")
    even = np.ones(z.shape[1])
    odd = np.zeros(z.shape[1])
    for zk, ztk in zip(z, zt):
        even, odd = even * zk + odd * ztk, even * ztk + odd * zk
    return even, odd


def oscf_enumerate(pairs) -> tuple[np.ndarray, np.ndarray]:
    """Brute-force 2^K evaluation of :func:`oscf_even_odd` (reference only)."""
    z, zt = _as_pairs(pairs)
    k, p = z.shape
    if k > MAX_K:
        raise KTooLarge(f"K={k} exceeds the supported maximum of {MAX_K} studies")
    even = np.zeros(p)
    odd = np.zeros(p)
    for a in itertools.product((0, 1), repeat=k):
        term = np.ones(p)
        for kk, ak in enumerate(a):
            term = term * (z[kk] if ak else zt[kk])
        if sum(a) % 2 == k % 2:
            even += term
        else:
            odd += term
    return even, odd


def _pair(zc, zc_tilde) -> tuple[np.ndarray, np.ndarray]:
    zc = np.atleast_1d(np.asarray(zc, dtype=float))
    zc_tilde = np.atleast_1d(np.asarray(zc_tilde, dtype=float))
    if zc.shape != zc_tilde.shape:
        raise DimensionMismatch(f"shapes {zc.shape} and {zc_tilde.shape} differ")
    return zc, zc_tilde


def flip_sign_diff(zc, zc_tilde) -> np.ndarray:
    """``w = zc - zc_tilde``."""
    zc, zc_tilde = _pair(zc, zc_tilde)
    return zc - zc_tilde


def flip_sign_signed_max(zc, zc_tilde) -> np.ndarray:
    """``max(zc, zc_tilde)``, negated where ``zc < zc_tilde`` (ties stay positive)."""
    zc, zc_tilde = _pair(zc, zc_tilde)
    return np.where(zc < zc_tilde, -zc_tilde, np.maximum(zc, zc_tilde))


_DIRECT = {
    CombinerSpec.DIRECT_MAX_SUM: (lambda z, zt: np.maximum(z, zt), np.sum),
    CombinerSpec.DIRECT_MAX_MAX: (lambda z, zt: np.maximum(z, zt), np.max),
    CombinerSpec.DIRECT_DIFF_SUM: (lambda z, zt: np.abs(z - zt), np.sum),
    CombinerSpec.DIRECT_DIFF_MAX: (lambda z, zt: np.abs(z - zt), np.max),
    CombinerSpec.DIRECT_SUM_SUM: (lambda z, zt: z + zt, np.sum),
    CombinerSpec.DIRECT_SUM_MAX: (lambda z, zt: z + zt, np.max),
}


def study_sign_product(z: np.ndarray, zt: np.ndarray) -> np.ndarray:
    """Product over studies of ``sign(z^k - zt^k)``; a tie in any study gives 0."""
    return np.prod(np.sign(z - zt), axis=0)


def combine(pairs: Sequence, spec: "str | CombinerSpec" = CombinerSpec.PRODUCT_DIFF) -> FilterStats:
    """Combine K statistic pairs into a filter vector.

    Parameters
    ----------
    pairs : sequence of ``(z, zt)`` tuples or ZStats
        One entry per study; all vectors share length p and are nonnegative.
    spec : CombinerSpec or str
        ``product-diff`` takes the elementwise product of ``z^k - zt^k``;
        ``oscf-diff`` / ``oscf-max`` apply the difference / signed max to the
        parity combination; the ``direct-*`` family multiplies an aggregated
        magnitude by the product of per-study signs.

    Returns
    -------
    FilterStats
    """
    spec = CombinerSpec.parse(spec)
    z, zt = _as_pairs(pairs)
    if np.any(z < 0) or np.any(zt < 0):
        raise ValidationError("statistics must be nonnegative")
    if spec is CombinerSpec.PRODUCT_DIFF:
        w = np.prod(z - zt, axis=0)
    elif spec is CombinerSpec.OSCF_DIFF:
        w = flip_sign_diff(*oscf_even_odd(zip(z, zt)))
    elif spec is CombinerSpec.OSCF_MAX:
        w = flip_sign_signed_max(*oscf_even_odd(zip(z, zt)))
    else:
        per_study, aggregate = _DIRECT[spec]
        magnitude = aggregate(per_study(z, zt), axis=0)
        w = study_sign_product(z, zt) * magnitude
    return FilterStats(np.asarray(w, dtype=float) + 0.0, spec)
