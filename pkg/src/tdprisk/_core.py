"""Compiled numerical kernels.

The negative log-likelihood, its gradient, and the descent loop live here as
numba-compiled functions. The public API in :mod:`tdprisk.model` and the
optimizer in :mod:`tdprisk.trainer` call the same kernels, so quantities such
as the convergence certificate (gradient max-norm at the returned
coefficients) are bitwise consistent between training and later inspection.

All kernels take the design matrix ``X`` with an explicit leading intercept
column of ones, labels ``y`` as int64 class indices (0, 1, 2), and the
coefficient matrix ``beta`` with shape (3, p + 1). The ridge penalty never
touches column 0 (the intercepts).
"""

import math

import numpy as np
from numba import njit

# Backtracking line-search constants: Armijo sufficient-decrease coefficient,
# the halving floor below which a step is considered numerically dead, and a
# hard cap on halvings per iteration.
ARMIJO_C = 1e-4
MIN_STEP = 1e-18
MAX_HALVINGS = 200


@njit(cache=True, nogil=True, inline="always")
def _row_scores(X, beta, i):
    s0 = 0.0
    s1 = 0.0
    s2 = 0.0
    for j in range(X.shape[1]):
        xj = X[i, j]
        s0 += beta[0, j] * xj
        s1 += beta[1, j] * xj
        s2 += beta[2, j] * xj
    return s0, s1, s2


@njit(cache=True, nogil=True)
def nll(X, y, beta, ridge):
    """Negative log-likelihood with ridge penalty on non-intercept entries.

    Uses the log-sum-exp form (max score subtracted before exponentiation),
    so arbitrarily large scores cannot overflow.
    """
    n = X.shape[0]
    total = 0.0
    for i in range(n):
        s0, s1, s2 = _row_scores(X, beta, i)
        m = max(s0, max(s1, s2))
        e0 = 1.0 if s0 == m else math.exp(s0 - m)
        e1 = 1.0 if s1 == m else math.exp(s1 - m)
        e2 = 1.0 if s2 == m else math.exp(s2 - m)
        lse = m + math.log(e0 + e1 + e2)
        if y[i] == 0:
            total += lse - s0
        elif y[i] == 1:
            total += lse - s1
        else:
            total += lse - s2
    pen = 0.0
    for k in range(3):
        for j in range(1, X.shape[1]):
            pen += beta[k, j] * beta[k, j]
    return total + 0.5 * ridge * pen


@njit(cache=True, nogil=True)
def nll_grad(X, y, beta, ridge):
    """Gradient of :func:`nll`: sum of (softmax - onehot) outer products."""
    n = X.shape[0]
    p1 = X.shape[1]
    g = np.zeros((3, p1))
    for i in range(n):
        s0, s1, s2 = _row_scores(X, beta, i)
        m = max(s0, max(s1, s2))
        e0 = 1.0 if s0 == m else math.exp(s0 - m)
        e1 = 1.0 if s1 == m else math.exp(s1 - m)
        e2 = 1.0 if s2 == m else math.exp(s2 - m)
        z = e0 + e1 + e2
        d0 = e0 / z
        d1 = e1 / z
        d2 = e2 / z
        if y[i] == 0:
            d0 -= 1.0
        elif y[i] == 1:
            d1 -= 1.0
        else:
            d2 -= 1.0
        for j in range(p1):
            xj = X[i, j]
            g[0, j] += d0 * xj
            g[1, j] += d1 * xj
            g[2, j] += d2 * xj
    for k in range(3):
        for j in range(1, p1):
            g[k, j] += ridge * beta[k, j]
    return g


@njit(cache=True, nogil=True)
def descend(X, y, ridge, tol, max_iter):
    """Gradient descent with backtracking line search from beta = 0.

    Each iteration takes the steepest-descent direction, starts the step at
    1.0, and halves it until the Armijo sufficient-decrease test passes.
    Stops when the gradient max-norm falls to ``tol``, when ``max_iter``
    accepted steps have been taken, or when no representable step decreases
    the objective any further (a float64 stall near the optimum; reported as
    not converged unless the gradient test also passes).

    Returns ``(beta, final_nll, iterations, converged)`` where ``iterations``
    counts accepted descent steps.
    """
    p1 = X.shape[1]
    beta = np.zeros((3, p1))
    cand = np.empty((3, p1))
    f = nll(X, y, beta, ridge)
    iterations = 0
    for _ in range(max_iter):
        g = nll_grad(X, y, beta, ridge)
        gmax = 0.0
        gsq = 0.0
        for k in range(3):
            for j in range(p1):
                a = abs(g[k, j])
                if a > gmax:
                    gmax = a
                gsq += g[k, j] * g[k, j]
        if gmax <= tol:
            return beta, f, iterations, True
        t = 1.0
        accepted = False
        fc = f
        for _ in range(MAX_HALVINGS):
            for k in range(3):
                for j in range(p1):
                    cand[k, j] = beta[k, j] - t * g[k, j]
            fc = nll(X, y, cand, ridge)
            if fc <= f - ARMIJO_C * t * gsq:
                accepted = True
                break
            t *= 0.5
            if t < MIN_STEP:
                break
        if not accepted:
            return beta, f, iterations, False
        for k in range(3):
            for j in range(p1):
                beta[k, j] = cand[k, j]
        f = fc
        iterations += 1
    g = nll_grad(X, y, beta, ridge)
    gmax = 0.0
    for k in range(3):
        for j in range(p1):
            a = abs(g[k, j])
            if a > gmax:
                gmax = a
    return beta, f, iterations, gmax <= tol
