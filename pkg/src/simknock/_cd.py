"""Compiled coordinate-descent kernels for the l1-penalised fits."""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _soft(z, lam):
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


POLISH_EVERY = 10


@njit(cache=True, nogil=True)
def _polish_gram(gram, xty, beta, lam):
    """Feature-sign descent on the current active set.

    Repeatedly solves ``G_AA b_A = c_A - lam sign(b_A)`` on the nonzero set
    ``A``. A sign-consistent solution is taken outright; otherwise ``beta``
    moves along the segment up to the first zero crossing, that coordinate
    leaves ``A`` and the solve is repeated. Every move lowers the lasso
    objective. Coordinate descent alone crawls along nearly flat directions
    of ``[X Xt]``. Returns whether ``beta`` changed.
    """
    changed = False
    for _ in range(beta.size):
        idx = np.flatnonzero(beta != 0.0)
        k = idx.size
        if k == 0:
            return changed
        ga = np.empty((k, k))
        rhs = np.empty(k)
        for a in range(k):
            rhs[a] = xty[idx[a]] - lam * np.sign(beta[idx[a]])
            for b in range(k):
                ga[a, b] = gram[idx[a], idx[b]]
        sol = np.linalg.solve(ga, rhs)
        if not np.all(np.isfinite(sol)):
            return changed
        t = 1.0
        hit = -1
        for a in range(k):
            old = beta[idx[a]]
            if np.sign(sol[a]) != np.sign(old):
                ta = old / (old - sol[a])
                if ta < t:
                    t = ta
                    hit = a
        for a in range(k):
            beta[idx[a]] += t * (sol[a] - beta[idx[a]])
        changed = True
        if hit < 0:
            return changed
        beta[idx[hit]] = 0.0
    return changed


@njit(cache=True, nogil=True)
def gram_cd(gram, xty, beta, lam, tol, max_sweeps):
    """Minimise 0.5 b'Gb - c'b + lam |b|_1 in place.

    Uses covariance updates: the gradient ``c - G b`` is kept current so a
    coordinate that stays at zero costs O(1). Sweeps alternate between the
    full coordinate set and the active set until a full sweep moves no
    coefficient by ``tol`` or more.

    Returns ``(sweeps, converged)``.
    """
    m = gram.shape[0]
    grad = xty - gram @ beta
    active = np.zeros(m, dtype=np.bool_)
    sweeps = 0
    next_polish = POLISH_EVERY
    while sweeps < max_sweeps:
        if sweeps >= next_polish:
            next_polish = sweeps + POLISH_EVERY
            if _polish_gram(gram, xty, beta, lam):
                grad = xty - gram @ beta
        # full sweep
        sweeps += 1
        max_delta = 0.0
        for j in range(m):
            gjj = gram[j, j]
            old = beta[j]
            new = _soft(grad[j] + gjj * old, lam) / gjj
            if new != old:
                delta = new - old
                beta[j] = new
                for i in range(m):
                    grad[i] -= gram[i, j] * delta
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
            if new != 0.0:
                active[j] = True
        if max_delta < tol:
            return sweeps, True
        # active-set sweeps
        while sweeps < max_sweeps:
            if sweeps >= next_polish:
                next_polish = sweeps + POLISH_EVERY
                if _polish_gram(gram, xty, beta, lam):
                    grad = xty - gram @ beta
                    break
            sweeps += 1
            max_delta = 0.0
            for j in range(m):
                if not active[j]:
                    continue
                gjj = gram[j, j]
                old = beta[j]
                new = _soft(grad[j] + gjj * old, lam) / gjj
                if new != old:
                    delta = new - old
                    beta[j] = new
                    for i in range(m):
                        grad[i] -= gram[i, j] * delta
                    if abs(delta) > max_delta:
                        max_delta = abs(delta)
            if max_delta < tol:
                break
    return sweeps, False


@njit(cache=True, nogil=True)
def _polish_weighted(x, z, w, beta, b0, lam):
    """Feature-sign descent for the weighted problem with a free intercept.

    Same moves as :func:`_polish_gram`; the normal equations gain an
    unpenalised intercept row. Returns ``(b0, changed)``.
    """
    n = x.shape[0]
    changed = False
    for _ in range(beta.size):
        idx = np.flatnonzero(beta != 0.0)
        k = idx.size
        # design columns: intercept then the active features
        xa = np.empty((n, k + 1))
        for i in range(n):
            xa[i, 0] = 1.0
            for a in range(k):
                xa[i, a + 1] = x[i, idx[a]]
        xw = xa * w.reshape(-1, 1)
        lhs = xa.T @ xw / n
        rhs = xw.T @ z / n
        for a in range(k):
            rhs[a + 1] -= lam * np.sign(beta[idx[a]])
        sol = np.linalg.solve(lhs, rhs)
        if not np.all(np.isfinite(sol)):
            return b0, changed
        t = 1.0
        hit = -1
        for a in range(k):
            old = beta[idx[a]]
            if np.sign(sol[a + 1]) != np.sign(old):
                ta = old / (old - sol[a + 1])
                if ta < t:
                    t = ta
                    hit = a
        b0 += t * (sol[0] - b0)
        for a in range(k):
            beta[idx[a]] += t * (sol[a + 1] - beta[idx[a]])
        changed = True
        if hit < 0:
            return b0, changed
        beta[idx[hit]] = 0.0
    return b0, changed


@njit(cache=True, nogil=True)
def weighted_cd(x, z, w, beta, b0, lam, tol, max_sweeps):
    """Weighted least squares lasso with an unpenalised intercept.

    Minimises ``(1/2n) sum_i w_i (z_i - b0 - x_i'b)^2 + lam |b|_1``.
    ``beta`` is updated in place; returns ``(b0, sweeps, converged)``.
    """
    n, m = x.shape
    resid = z - b0 - x @ beta
    wsum = 0.0
    for i in range(n):
        wsum += w[i]
    xwx = np.zeros(m)
    for j in range(m):
        acc = 0.0
        for i in range(n):
            acc += w[i] * x[i, j] * x[i, j]
        xwx[j] = acc / n
    active = np.zeros(m, dtype=np.bool_)
    sweeps = 0
    full = True
    next_polish = POLISH_EVERY
    while sweeps < max_sweeps:
        if sweeps >= next_polish:
            next_polish = sweeps + POLISH_EVERY
            b0, moved = _polish_weighted(x, z, w, beta, b0, lam)
            if moved:
                resid = z - b0 - x @ beta
                full = True
        sweeps += 1
        max_delta = 0.0
        for j in range(m):
            if not full and not active[j]:
                continue
            if xwx[j] <= 0.0:
                continue
            old = beta[j]
            acc = 0.0
            for i in range(n):
                acc += w[i] * x[i, j] * resid[i]
            new = _soft(acc / n + xwx[j] * old, lam) / xwx[j]
            if new != old:
                delta = new - old
                beta[j] = new
                for i in range(n):
                    resid[i] -= x[i, j] * delta
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
            if new != 0.0:
                active[j] = True
        acc = 0.0
        for i in range(n):
            acc += w[i] * resid[i]
        d0 = acc / wsum
        b0 += d0
        for i in range(n):
            resid[i] -= d0
        if abs(d0) > max_delta:
            max_delta = abs(d0)
        if max_delta < tol:
            if full:
                return b0, sweeps, True
            full = True
        else:
            full = False
    return b0, sweeps, False


@njit(cache=True, nogil=True)
def logistic_cd(x, y, beta, b0, lam, tol, max_sweeps, max_outer):
    """l1-penalised logistic regression by IRLS with inner coordinate descent.

    Minimises ``-(1/n) loglik(b0, b) + lam |b|_1``. Returns
    ``(b0, total_sweeps, converged)``.
    """
    n, m = x.shape
    total = 0
    for outer in range(max_outer):
        eta = b0 + x @ beta
        prob = 1.0 / (1.0 + np.exp(-eta))
        w = np.empty(n)
        zwork = np.empty(n)
        for i in range(n):
            pi = min(max(prob[i], 1e-5), 1.0 - 1e-5)
            w[i] = pi * (1.0 - pi)
            zwork[i] = eta[i] + (y[i] - prob[i]) / w[i]
        old_beta = beta.copy()
        old_b0 = b0
        b0, sweeps, ok = weighted_cd(x, zwork, w, beta, b0, lam, tol, max_sweeps - total)
        total += sweeps
        if not ok:
            return b0, total, False
        change = abs(b0 - old_b0)
        for j in range(m):
            d = abs(beta[j] - old_beta[j])
            if d > change:
                change = d
        if change < tol:
            return b0, total, True
    return b0, total, False
