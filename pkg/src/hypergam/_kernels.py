"""Hot numeric kernels.

Two interchangeable implementations live here: numba-compiled loops (default)
and a pure numpy/scipy fallback, selected at import time via ``HYPERGAM_NUMBA``
(see :mod:`hypergam._backend`). Public names:

``chol_flag(A)``
    Lower Cholesky factor plus a success flag (no exceptions).
``solve_lower / solve_lower_t``
    Triangular solves against a lower factor (and its transpose).
``gaussian_score(M, ZtX, Zty, XtX, Xty, sst0, sum_log_dinv)``
    Sum-of-squares and log-determinant of one additive model from
    precomputed gram blocks; cost is independent of the sample size.
``iwls_fit / iwls_steps``
    Penalized iterative weighted least squares for the supported GLM
    families (0 = Bernoulli-logit, 1 = Poisson-log).
``hyp2f1_series_log(a, b, c, x, max_terms, rtol)``
    Log-scale power series for the Gaussian hypergeometric function.
``kahan_wdot(a, b, w)``
    Compensated weighted dot product used by the centering code.
"""

import math

import numpy as np

from ._backend import USE_NUMBA, jit

FAMILY_BERNOULLI = 0
FAMILY_POISSON = 1
FAMILY_GAUSSIAN_UNIT = 2  # identity link, unit variance; IWLS is exact

_ETA_CLIP = 30.0

__all__ = [
    "FAMILY_BERNOULLI",
    "FAMILY_POISSON",
    "chol_flag",
    "solve_lower",
    "solve_lower_t",
    "gaussian_score",
    "iwls_fit",
    "iwls_steps",
    "hyp2f1_series_log",
    "kahan_wdot",
]


# ---------------------------------------------------------------------------
# numba implementations (explicit loops, compiled to machine code)
# ---------------------------------------------------------------------------

@jit
def _nb_chol_flag(A):
    n = A.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not (s > 0.0) or not np.isfinite(s):
            return L, False
        L[j, j] = math.sqrt(s)
        inv = 1.0 / L[j, j]
        for i in range(j + 1, n):
            t = A[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t * inv
    return L, True


@jit
def _nb_solve_lower(L, B):
    n = L.shape[0]
    m = B.shape[1]
    X = np.empty((n, m))
    for c in range(m):
        for i in range(n):
            t = B[i, c]
            for k in range(i):
                t -= L[i, k] * X[k, c]
            X[i, c] = t / L[i, i]
    return X

@jit
def _nb_solve_lower_t(L, B):
    n = L.shape[0]
    m = B.shape[1]
    X = np.empty((n, m))
    for c in range(m):
        for i in range(n - 1, -1, -1):
            t = B[i, c]
            for k in range(i + 1, n):
                t -= L[k, i] * X[k, c]
            X[i, c] = t / L[i, i]
    return X


@jit
def _nb_gaussian_score(M, ZtX, Zty, XtX, Xty, sst0, sum_log_dinv):
    """Return (sst, ssm, log_det_half, status).

    status: 0 ok, 1 spline gram not PD, 2 collinear linear block.
    """
    q = M.shape[0]
    p = XtX.shape[0]
    sst = sst0
    log_det_half = 0.0
    ssm = 0.0
    if q > 0:
        L, ok = _nb_chol_flag(M)
        if not ok:
            return 0.0, 0.0, 0.0, 1
        log_det_m = 0.0
        for i in range(q):
            log_det_m += math.log(L[i, i])
        # |I + Z D Z'| = |M| / |D^{-1}|
        log_det_half = -(2.0 * log_det_m - sum_log_dinv) / 2.0
        a = _nb_solve_lower(L, Zty.reshape(q, 1))
        for i in range(q):
            sst -= a[i, 0] * a[i, 0]
        if p > 0:
            C = _nb_solve_lower(L, ZtX)
            A = np.empty((p, p))
            bx = np.empty(p)
            for i in range(p):
                t = Xty[i]
                for k in range(q):
                    t -= C[k, i] * a[k, 0]
                bx[i] = t
                for j in range(p):
                    s = XtX[i, j]
                    for k in range(q):
                        s -= C[k, i] * C[k, j]
                    A[i, j] = s
            LA, ok2 = _nb_chol_flag(A)
            if not ok2:
                return 0.0, 0.0, 0.0, 2
            v = _nb_solve_lower(LA, bx.reshape(p, 1))
            for i in range(p):
                ssm += v[i, 0] * v[i, 0]
    elif p > 0:
        LA, ok2 = _nb_chol_flag(XtX)
        if not ok2:
            return 0.0, 0.0, 0.0, 2
        v = _nb_solve_lower(LA, Xty.reshape(p, 1))
        for i in range(p):
            ssm += v[i, 0] * v[i, 0]
    return sst, ssm, log_det_half, 0


@jit
def _nb_glm_weights(eta, y, family_id):
    """Working weights, working response and log-likelihood at eta."""
    n = eta.shape[0]
    w = np.empty(n)
    z = np.empty(n)
    ll = 0.0
    for i in range(n):
        e = eta[i]
        if family_id == FAMILY_GAUSSIAN_UNIT:
            w[i] = 1.0
            z[i] = y[i]
            ll += -0.5 * (y[i] - e) * (y[i] - e)
            continue
        if e > _ETA_CLIP:
            e = _ETA_CLIP
        elif e < -_ETA_CLIP:
            e = -_ETA_CLIP
        if family_id == FAMILY_BERNOULLI:
            mu = 1.0 / (1.0 + math.exp(-e))
            v = mu * (1.0 - mu)
            w[i] = v
            z[i] = e + (y[i] - mu) / v
            if e > 0.0:
                ll += y[i] * e - e - math.log1p(math.exp(-e))
            else:
                ll += y[i] * e - math.log1p(math.exp(e))
        else:
            mu = math.exp(e)
            w[i] = mu
            z[i] = e + (y[i] - mu) / mu
            ll += y[i] * e - mu
    return w, z, ll


@jit
def _nb_penalized_lsq(Xa, w, z, P):
    """Solve (Xa' W Xa + P) beta = Xa' W z; returns (beta, L, ok)."""
    q = Xa.shape[1]
    Xw = Xa * w.reshape(-1, 1)
    A = Xa.T @ Xw + P
    b = Xw.T @ z
    L, ok = _nb_chol_flag(A)
    beta = np.zeros(q)
    if ok:
        u = _nb_solve_lower(L, b.reshape(q, 1))
        beta = np.ascontiguousarray(_nb_solve_lower_t(L, u)[:, 0])
    return beta, L, ok


@jit
def _nb_iwls_fit(Xa, y, P, beta_init, family_id, max_iter, tol):
    """Penalized IWLS to convergence. Returns (beta, L, loglik, iters, status).

    status: 0 converged, 1 iteration cap reached, 2 numerical failure.
    The returned L is the Cholesky factor of Xa' W Xa + P at the final beta.
    """
    q = Xa.shape[1]
    beta = beta_init.copy()
    crit_old = np.inf
    status = 1
    it = 0
    for it in range(1, max_iter + 1):
        eta = Xa @ beta
        w, z, ll = _nb_glm_weights(eta, y, family_id)
        beta_new, L, ok = _nb_penalized_lsq(Xa, w, z, P)
        if not ok or not np.all(np.isfinite(beta_new)):
            return beta, L, -np.inf, it, 2
        beta = beta_new
        pen = 0.0
        for i in range(q):
            for j in range(q):
                pen += beta[i] * P[i, j] * beta[j]
        eta = Xa @ beta
        w, z, ll = _nb_glm_weights(eta, y, family_id)
        crit = -2.0 * (ll - 0.5 * pen)
        if abs(crit - crit_old) < tol:
            status = 0
            break
        crit_old = crit
    # information matrix at the final beta
    eta = Xa @ beta
    w, z, ll = _nb_glm_weights(eta, y, family_id)
    Xw = Xa * w.reshape(-1, 1)
    A = Xa.T @ Xw + P
    L, ok = _nb_chol_flag(A)
    if not ok:
        return beta, L, -np.inf, it, 2
    return beta, L, ll, it, status


@jit
def _nb_iwls_steps(Xa, y, P, beta_init, family_id, k_steps):
    """Exactly k penalized scoring steps; proposal mean and factor for MH.

    Returns (m, L, ok): m is the mean after k steps, L the Cholesky factor of
    the penalized information built at the (k-1)-th iterate.
    """
    beta = beta_init.copy()
    L = np.zeros((Xa.shape[1], Xa.shape[1]))
    for _ in range(k_steps):
        eta = Xa @ beta
        w, z, _ = _nb_glm_weights(eta, y, family_id)
        beta_new, L, ok = _nb_penalized_lsq(Xa, w, z, P)
        if not ok or not np.all(np.isfinite(beta_new)):
            return beta, L, False
        beta = beta_new
    return beta, L, True


@jit
def _nb_hyp2f1_series_log(a, b, c, x, max_terms, rtol):
    """Log-scale sum of the 2F1 power series. Returns (log_abs, sign, ok)."""
    if x == 0.0:
        return 0.0, 1.0, True
    log_rtol = math.log(rtol)
    log_t = 0.0
    sign_t = 1.0
    scale = 0.0
    acc = 1.0
    log_absx = math.log(abs(x))
    sign_x = 1.0 if x > 0 else -1.0
    for k in range(max_terms):
        num = (a + k) * (b + k)
        den = (c + k) * (k + 1.0)
        if num == 0.0:
            break  # terminating series
        ratio = abs(num / den) * abs(x)
        log_t += math.log(abs(num)) - math.log(abs(den)) + log_absx
        s = sign_x
        if num < 0.0:
            s = -s
        if den < 0.0:
            s = -s
        sign_t *= s
        if log_t > scale:
            acc = acc * math.exp(scale - log_t) + sign_t
            scale = log_t
        else:
            acc += sign_t * math.exp(log_t - scale)
        if acc != 0.0 and ratio < 1.0:
            if log_t - (scale + math.log(abs(acc))) < log_rtol:
                return scale + math.log(abs(acc)), (1.0 if acc > 0 else -1.0), True
    if acc == 0.0:
        return -np.inf, 1.0, False
    return scale + math.log(abs(acc)), (1.0 if acc > 0 else -1.0), False


@jit
def _nb_kahan_wdot(a, b, w):
    s = 0.0
    comp = 0.0
    for i in range(a.shape[0]):
        term = a[i] * b[i] * w[i] - comp
        t = s + term
        comp = (t - s) - term
        s = t
    return s


# ---------------------------------------------------------------------------
# numpy/scipy fallback implementations
# ---------------------------------------------------------------------------

def _np_chol_flag(A):
    try:
        return np.linalg.cholesky(A), True
    except np.linalg.LinAlgError:
        return np.zeros_like(A), False


def _np_solve_lower(L, B):
    from scipy.linalg import solve_triangular

    if L.shape[0] == 0:
        return np.zeros_like(B)
    return solve_triangular(L, B, lower=True, check_finite=False)


def _np_solve_lower_t(L, B):
    from scipy.linalg import solve_triangular

    if L.shape[0] == 0:
        return np.zeros_like(B)
    return solve_triangular(L, B, lower=True, trans="T", check_finite=False)


def _np_gaussian_score(M, ZtX, Zty, XtX, Xty, sst0, sum_log_dinv):
    q = M.shape[0]
    p = XtX.shape[0]
    sst = sst0
    log_det_half = 0.0
    ssm = 0.0
    if q > 0:
        L, ok = _np_chol_flag(M)
        if not ok:
            return 0.0, 0.0, 0.0, 1
        log_det_half = -(2.0 * np.sum(np.log(np.diag(L))) - sum_log_dinv) / 2.0
        a = _np_solve_lower(L, Zty.reshape(q, 1))[:, 0]
        sst -= a @ a
        if p > 0:
            C = _np_solve_lower(L, ZtX)
            A = XtX - C.T @ C
            bx = Xty - C.T @ a
            LA, ok2 = _np_chol_flag(A)
            if not ok2:
                return 0.0, 0.0, 0.0, 2
            v = _np_solve_lower(LA, bx.reshape(p, 1))[:, 0]
            ssm = v @ v
    elif p > 0:
        LA, ok2 = _np_chol_flag(XtX)
        if not ok2:
            return 0.0, 0.0, 0.0, 2
        v = _np_solve_lower(LA, Xty.reshape(p, 1))[:, 0]
        ssm = v @ v
    return sst, ssm, log_det_half, 0


def _np_glm_weights(eta, y, family_id):
    if family_id == FAMILY_GAUSSIAN_UNIT:
        w = np.ones_like(eta)
        z = y.copy()
        ll = float(-0.5 * np.sum((y - eta) ** 2))
        return w, z, ll
    e = np.clip(eta, -_ETA_CLIP, _ETA_CLIP)
    if family_id == FAMILY_BERNOULLI:
        mu = 1.0 / (1.0 + np.exp(-e))
        w = mu * (1.0 - mu)
        z = e + (y - mu) / w
        ll = float(np.sum(y * e - np.logaddexp(0.0, e)))
    else:
        mu = np.exp(e)
        w = mu
        z = e + (y - mu) / mu
        ll = float(np.sum(y * e - mu))
    return w, z, ll


def _np_penalized_lsq(Xa, w, z, P):
    Xw = Xa * w[:, None]
    A = Xa.T @ Xw + P
    b = Xw.T @ z
    L, ok = _np_chol_flag(A)
    if not ok:
        return np.zeros(Xa.shape[1]), L, False
    u = _np_solve_lower(L, b.reshape(-1, 1))
    beta = _np_solve_lower_t(L, u)[:, 0]
    return beta, L, ok


def _np_iwls_fit(Xa, y, P, beta_init, family_id, max_iter, tol):
    beta = beta_init.copy()
    crit_old = np.inf
    status = 1
    it = 0
    for it in range(1, max_iter + 1):
        w, z, _ = _np_glm_weights(Xa @ beta, y, family_id)
        beta_new, L, ok = _np_penalized_lsq(Xa, w, z, P)
        if not ok or not np.all(np.isfinite(beta_new)):
            return beta, L, -np.inf, it, 2
        beta = beta_new
        pen = float(beta @ P @ beta)
        _, _, ll = _np_glm_weights(Xa @ beta, y, family_id)
        crit = -2.0 * (ll - 0.5 * pen)
        if abs(crit - crit_old) < tol:
            status = 0
            break
        crit_old = crit
    w, _, ll = _np_glm_weights(Xa @ beta, y, family_id)
    A = Xa.T @ (Xa * w[:, None]) + P
    L, ok = _np_chol_flag(A)
    if not ok:
        return beta, L, -np.inf, it, 2
    return beta, L, ll, it, status


def _np_iwls_steps(Xa, y, P, beta_init, family_id, k_steps):
    beta = beta_init.copy()
    L = np.zeros((Xa.shape[1], Xa.shape[1]))
    for _ in range(k_steps):
        w, z, _ = _np_glm_weights(Xa @ beta, y, family_id)
        beta_new, L, ok = _np_penalized_lsq(Xa, w, z, P)
        if not ok or not np.all(np.isfinite(beta_new)):
            return beta, L, False
        beta = beta_new
    return beta, L, True


def _np_hyp2f1_series_log(a, b, c, x, max_terms, rtol):
    if x == 0.0:
        return 0.0, 1.0, True
    log_rtol = math.log(rtol)
    log_t = 0.0
    sign_t = 1.0
    scale = 0.0
    acc = 1.0
    log_absx = math.log(abs(x))
    sign_x = 1.0 if x > 0 else -1.0
    for k in range(max_terms):
        num = (a + k) * (b + k)
        den = (c + k) * (k + 1.0)
        if num == 0.0:
            break
        ratio = abs(num / den) * abs(x)
        log_t += math.log(abs(num)) - math.log(abs(den)) + log_absx
        s = sign_x
        if num < 0.0:
            s = -s
        if den < 0.0:
            s = -s
        sign_t *= s
        if log_t > scale:
            acc = acc * math.exp(scale - log_t) + sign_t
            scale = log_t
        else:
            acc += sign_t * math.exp(log_t - scale)
        if acc != 0.0 and ratio < 1.0:
            if log_t - (scale + math.log(abs(acc))) < log_rtol:
                return scale + math.log(abs(acc)), (1.0 if acc > 0 else -1.0), True
    if acc == 0.0:
        return -np.inf, 1.0, False
    return scale + math.log(abs(acc)), (1.0 if acc > 0 else -1.0), False


def _np_kahan_wdot(a, b, w):
    return math.fsum((np.asarray(a) * np.asarray(b) * np.asarray(w)).tolist())


# ---------------------------------------------------------------------------
# public bindings
# ---------------------------------------------------------------------------

if USE_NUMBA:
    chol_flag = _nb_chol_flag
    solve_lower = _nb_solve_lower
    solve_lower_t = _nb_solve_lower_t
    gaussian_score = _nb_gaussian_score
    iwls_fit = _nb_iwls_fit
    iwls_steps = _nb_iwls_steps
    hyp2f1_series_log = _nb_hyp2f1_series_log
    kahan_wdot = _nb_kahan_wdot
else:
    chol_flag = _np_chol_flag
    solve_lower = _np_solve_lower
    solve_lower_t = _np_solve_lower_t
    gaussian_score = _np_gaussian_score
    iwls_fit = _np_iwls_fit
    iwls_steps = _np_iwls_steps
    hyp2f1_series_log = _np_hyp2f1_series_log
    kahan_wdot = _np_kahan_wdot
