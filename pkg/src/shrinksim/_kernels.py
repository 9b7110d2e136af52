"""Compiled inner loops for logistic fitting.

Parameter vectors here are ``theta = (intercept, beta_1, ..., beta_p)``.
Status codes returned by the solvers:

    0  converged
    1  iteration cap reached
    2  singular system on the first iteration (rank deficiency)
    3  numerical breakdown after the first iteration (typically separation)
"""

import numpy as np
from numba import njit

CONVERGED = 0
MAX_ITER = 1
SINGULAR = 2
BREAKDOWN = 3


@njit(cache=True)
def log1pexp(x):
    if x > 0.0:
        return x + np.log1p(np.exp(-x))
    return np.log1p(np.exp(x))


@njit(cache=True)
def sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@njit(cache=True)
def linear_predictor(X, theta):
    n, p = X.shape
    eta = np.empty(n)
    for i in range(n):
        s = theta[0]
        for j in range(p):
            s += X[i, j] * theta[j + 1]
        eta[i] = s
    return eta


@njit(cache=True)
def loglik_eta(eta, y):
    s = 0.0
    for i in range(eta.size):
        s += y[i] * eta[i] - log1pexp(eta[i])
    return s


@njit(cache=True)
def cholesky_solve(A, b):
    """Solve A x = b for symmetric positive definite A; ok=False if not PD."""
    m = A.shape[0]
    L = np.zeros((m, m))
    for j in range(m):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not (s > 1e-13 * A[j, j]) or not (A[j, j] > 0.0):
            return np.zeros(m), False
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, m):
            t = A[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / L[j, j]
    z = np.empty(m)
    for i in range(m):
        t = b[i]
        for k in range(i):
            t -= L[i, k] * z[k]
        z[i] = t / L[i, i]
    x = np.empty(m)
    for i in range(m - 1, -1, -1):
        t = z[i]
        for k in range(i + 1, m):
            t -= L[k, i] * x[k]
        x[i] = t / L[i, i]
    return x, True


@njit(cache=True)
def _score_and_information(X, y, eta, scale):
    """Gradient of the log-likelihood and the information matrix, times ``scale``."""
    n, p = X.shape
    g = np.zeros(p + 1)
    H = np.zeros((p + 1, p + 1))
    for i in range(n):
        pr = sigmoid(eta[i])
        r = y[i] - pr
        w = pr * (1.0 - pr)
        g[0] += r
        H[0, 0] += w
        for j in range(p):
            xij = X[i, j]
            g[j + 1] += r * xij
            wx = w * xij
            H[0, j + 1] += wx
            for k in range(j, p):
                H[j + 1, k + 1] += wx * X[i, k]
    for j in range(p + 1):
        g[j] *= scale
        for k in range(j, p + 1):
            H[j, k] *= scale
            H[k, j] = H[j, k]
    return g, H


@njit(cache=True)
def irls(X, y, max_iter, tol):
    """Maximum-likelihood logistic regression by IRLS with step halving.

    Convergence when ``|dev - dev_old| / (|dev| + 0.1) < tol`` with
    ``dev = -2 loglik``. Returns ``(theta, loglik, status, n_iter, trace)``
    where ``trace`` holds the log-likelihood after every accepted step.
    """
    n, p = X.shape
    theta = np.zeros(p + 1)
    ybar = y.mean()
    theta[0] = np.log(ybar / (1.0 - ybar))
    eta = linear_predictor(X, theta)
    ll = loglik_eta(eta, y)
    trace = np.full(max_iter + 1, np.nan)
    trace[0] = ll
    status = MAX_ITER
    it = 0
    while it < max_iter:
        g, H = _score_and_information(X, y, eta, 1.0)
        delta, ok = cholesky_solve(H, g)
        if not ok:
            status = SINGULAR if it == 0 else BREAKDOWN
            break
        step = 1.0
        accepted = False
        for _ in range(30):
            trial = theta + step * delta
            eta_t = linear_predictor(X, trial)
            ll_t = loglik_eta(eta_t, y)
            if ll_t >= ll:
                accepted = True
                break
            step *= 0.5
        it += 1
        if not accepted:
            # no ascent available in floating point: at the optimum
            status = CONVERGED
            break
        rel = 2.0 * abs(ll_t - ll) / (2.0 * abs(ll_t) + 0.1)
        theta = trial
        eta = eta_t
        ll = ll_t
        trace[it] = ll
        if rel < tol:
            status = CONVERGED
            break
    return theta, ll, status, it, trace


@njit(cache=True)
def penalized_objective(X, y, theta, l1, l2):
    """``-loglik/n + sum(l1*|b|) + sum(l2*b^2)``; the intercept is unpenalized."""
    n = y.size
    eta = linear_predictor(X, theta)
    f = -loglik_eta(eta, y) / n
    for j in range(l1.size):
        b = theta[j + 1]
        f += l1[j] * abs(b) + l2[j] * b * b
    return f


@njit(cache=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def penalized_solve(X, y, l1, l2, nonneg, theta0, max_iter, tol):
    """Proximal Newton for the penalized mean log-likelihood.

    The quadratic model at each outer step is minimized exactly (Cholesky)
    when the penalty is smooth, otherwise by cyclic coordinate descent with
    soft-thresholding, clipped at zero when ``nonneg``. A backtracking line
    search on the exact objective guards every outer step.
    """
    n, p = X.shape
    smooth = not nonneg
    for j in range(p):
        if l1[j] != 0.0:
            smooth = False
    theta = theta0.copy()
    if nonneg:
        for j in range(p):
            if theta[j + 1] < 0.0:
                theta[j + 1] = 0.0
    F = penalized_objective(X, y, theta, l1, l2)
    status = MAX_ITER
    for it in range(max_iter):
        eta = linear_predictor(X, theta)
        g, H = _score_and_information(X, y, eta, 1.0 / n)
        # g is the ascent direction of loglik/n; flip to the descent gradient
        for k in range(p + 1):
            g[k] = -g[k]
        if smooth:
            A = H.copy()
            rhs = -g.copy()
            for j in range(p):
                A[j + 1, j + 1] += 2.0 * l2[j]
                rhs[j + 1] -= 2.0 * l2[j] * theta[j + 1]
            d, ok = cholesky_solve(A, rhs)
            if not ok:
                status = SINGULAR if it == 0 else BREAKDOWN
                break
            cand = theta + d
        else:
            cand = theta.copy()
            Hd = np.zeros(p + 1)
            for sweep in range(10000):
                maxdiff = 0.0
                maxabs = 0.0
                if H[0, 0] > 0.0:
                    new = cand[0] - (g[0] + Hd[0]) / H[0, 0]
                    diff = new - cand[0]
                    if diff != 0.0:
                        for k in range(p + 1):
                            Hd[k] += H[k, 0] * diff
                        cand[0] = new
                        maxdiff = max(maxdiff, abs(diff))
                    maxabs = max(maxabs, abs(new))
                for j in range(1, p + 1):
                    cur = cand[j]
                    z = H[j, j] * cur - (g[j] + Hd[j])
                    denom = H[j, j] + 2.0 * l2[j - 1]
                    if denom > 0.0:
                        new = _soft(z, l1[j - 1]) / denom
                    else:
                        new = 0.0
                    if nonneg and new < 0.0:
                        new = 0.0
                    diff = new - cur
                    if diff != 0.0:
                        for k in range(p + 1):
                            Hd[k] += H[k, j] * diff
                        cand[j] = new
                        maxdiff = max(maxdiff, abs(diff))
                    maxabs = max(maxabs, abs(new))
                if maxdiff <= 1e-14 * (1.0 + maxabs):
                    break
        step = 1.0
        accepted = False
        for _ in range(50):
            trial = theta + step * (cand - theta)
            Ft = penalized_objective(X, y, trial, l1, l2)
            if Ft <= F:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            status = CONVERGED
            break
        change = 0.0
        size = 0.0
        for k in range(p + 1):
            change = max(change, abs(trial[k] - theta[k]))
            size = max(size, abs(trial[k]))
        theta = trial
        F = Ft
        if change <= tol * (1.0 + size):
            status = CONVERGED
            break
    return theta, status


@njit(cache=True)
def penalized_path(X, y, lambdas, l1_scale, l2_scale, nonneg, max_iter, tol):
    """Solve along ``lambdas`` in the given order with warm starts."""
    n, p = X.shape
    L = lambdas.size
    thetas = np.zeros((L, p + 1))
    status = np.zeros(L, dtype=np.int64)
    theta = np.zeros(p + 1)
    ybar = y.mean()
    theta[0] = np.log(ybar / (1.0 - ybar))
    for k in range(L):
        th, st = penalized_solve(
            X, y, lambdas[k] * l1_scale, lambdas[k] * l2_scale, nonneg, theta, max_iter, tol
        )
        thetas[k] = th
        status[k] = st
        if st == CONVERGED:
            theta = th
    return thetas, status

