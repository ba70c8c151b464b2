"""Log-scale evaluation of the hypergeometric functions 2F1 and Appell F1.

Both functions appear as Bayes-factor terms whose magnitudes overflow double
precision for realistic sample sizes, so results are returned as
``(sign, log|value|)`` pairs with an explicit convergence status. A failed
status signals the caller to fall back to a Laplace approximation.

Evaluation strategy:

* ``gauss_2f1`` sums the power series in log scale for small arguments. For
  x > 0.5 with unit second parameter (the region the marginal-likelihood
  formulas produce) it switches to an exact incomplete-beta representation,
  which stays accurate as x approaches 1 where the series peaks late.
* ``appell_f1`` integrates the one-dimensional Euler representation

      F1(a; b1, b2; c; x, y) = Gamma(c) / (Gamma(a) Gamma(c-a)) *
          int_0^1 u^(a-1) (1-u)^(c-a-1) (1-u x)^(-b1) (1-u y)^(-b2) du

  with adaptive quadrature on the log of the (positive) integrand.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import betainc, betaln, gammaln

from ._kernels import hyp2f1_series_log

__all__ = ["SpecialValue", "gauss_2f1", "appell_f1"]

_SERIES_CAP = 50_000
_SERIES_RTOL = 1e-14


@dataclass(frozen=True)
class SpecialValue:
    """A special-function value in (sign, log|value|) form."""

    log_abs: float
    sign: float
    converged: bool

    @property
    def value(self) -> float:
        """Plain float value; may overflow to +/-inf for large magnitudes."""
        return self.sign * math.exp(self.log_abs)


def _series(a, b, c, x) -> SpecialValue:
    log_abs, sign, ok = hyp2f1_series_log(a, b, c, x, _SERIES_CAP, _SERIES_RTOL)
    return SpecialValue(log_abs=log_abs, sign=sign, converged=bool(ok))


def _betainc_form(a, c, x) -> SpecialValue:
    # 2F1(a, 1; c; x) = (c-1) B(c-1, a-c+1) I_x(c-1, a-c+1) x^(1-c) (1-x)^(c-1-a)
    # for c > 1 and a - c + 1 > 0; exact for all 0 < x < 1.
    p, q = c - 1.0, a - c + 1.0
    reg = betainc(p, q, x)
    if not np.isfinite(reg) or reg <= 0.0:
        return SpecialValue(log_abs=np.nan, sign=1.0, converged=False)
    log_abs = (
        math.log(p)
        + betaln(p, q)
        + math.log(reg)
        - p * math.log(x)
        + (c - 1.0 - a) * math.log1p(-x)
    )
    return SpecialValue(log_abs=log_abs, sign=1.0, converged=True)


def gauss_2f1(a: float, b: float, c: float, x: float) -> SpecialValue:
    """Gaussian hypergeometric function 2F1(a, b; c; x) for x < 1."""
    if c <= 0 and c == round(c):
        raise ValueError("c must not be a non-positive integer")
    if x >= 1.0:
        raise ValueError("argument must satisfy x < 1")
    if x == 0.0:
        return SpecialValue(log_abs=0.0, sign=1.0, converged=True)
    if x < 0.0:
        # Pfaff: 2F1(a, b; c; x) = (1-x)^(-a) 2F1(a, c-b; c; x/(x-1))
        inner = gauss_2f1(a, c - b, c, x / (x - 1.0))
        return SpecialValue(
            log_abs=inner.log_abs - a * math.log1p(-x),
            sign=inner.sign,
            converged=inner.converged,
        )
    if x > 0.5 and b == 1.0 and c > 1.0 and a - c + 1.0 > 0.0:
        return _betainc_form(a, c, x)
    return _series(a, b, c, x)


def _f1_log_integrand(u, a, c, b1, b2, x, y):
    with np.errstate(divide="ignore"):
        t = (a - 1.0) * np.log(u) if a != 1.0 else 0.0
        s = (c - a - 1.0) * np.log1p(-u) if c - a != 1.0 else 0.0
    return t + s - b1 * np.log1p(-u * x) - b2 * np.log1p(-u * y)


def appell_f1(a: float, b1: float, b2: float, c: float, x: float, y: float) -> SpecialValue:
    """Appell hypergeometric function of the first kind, F1(a; b1, b2; c; x, y).

    Requires c > a > 0 (Euler representation) and x, y < 1. The integrand is
    strictly positive, so the sign is always +1.
    """
    if not (c > a > 0):
        raise ValueError("require c > a > 0")
    if x >= 1.0 or y >= 1.0:
        raise ValueError("arguments must satisfy x < 1 and y < 1")

    # locate the integrand peak on a dense grid, then integrate the
    # rescaled integrand adaptively
    eps = 1e-12
    ugrid = np.linspace(eps, 1.0 - eps, 2001)
    logf = _f1_log_integrand(ugrid, a, c, b1, b2, x, y)
    imax = int(np.argmax(logf))
    peak = float(logf[imax])
    upeak = float(ugrid[imax])
    if not np.isfinite(peak):
        return SpecialValue(log_abs=np.nan, sign=1.0, converged=False)

    def scaled(u):
        return math.exp(_f1_log_integrand(u, a, c, b1, b2, x, y) - peak)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=integrate.IntegrationWarning)
        val, err = integrate.quad(
            scaled, 0.0, 1.0, points=[upeak], limit=200, epsabs=1e-13, epsrel=1e-10
        )
    if not np.isfinite(val) or val <= 0.0 or err > 1e-8 * val:
        return SpecialValue(log_abs=np.nan, sign=1.0, converged=False)
    log_abs = (
        peak
        + math.log(val)
        + gammaln(c)
        - gammaln(a)
        - gammaln(c - a)
    )
    return SpecialValue(log_abs=log_abs, sign=1.0, converged=True)
