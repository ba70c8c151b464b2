"""Derivative-free scalar maximizers used by the quadrature and dof code."""

import math

__all__ = ["bracket_maximize", "golden_max_bounded"]

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def bracket_maximize(f, t0, step=2.0, xtol=0.05, max_expand=80):
    """Locate a local maximum of ``f`` starting from ``t0``.

    Expands downhill from the start until a bracket exists, then refines by
    golden section. Returns (t_star, f_star).
    """
    fm = f(t0)
    a, b = t0 - step, t0 + step
    fa, fb = f(a), f(b)
    n_exp = 0
    while not (fm >= fa and fm >= fb):
        if fa > fb:
            b, fb = t0, fm
            t0, fm = a, fa
            a = t0 - step
            fa = f(a)
        else:
            a, fa = t0, fm
            t0, fm = b, fb
            b = t0 + step
            fb = f(b)
        step *= 1.6
        n_exp += 1
        if n_exp > max_expand:
            break
    t, ft = golden_max_bounded(f, a, b, xtol=xtol)
    if fm > ft:
        return t0, fm
    return t, ft


def golden_max_bounded(f, lo, hi, xtol=1e-3, max_iter=200):
    """Golden-section maximization on [lo, hi]; returns (x_star, f_star)."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    best_x, best_f = (c, fc) if fc >= fd else (d, fd)
    for _ in range(max_iter):
        if b - a < xtol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
            if fc > best_f:
                best_x, best_f = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
            if fd > best_f:
                best_x, best_f = d, fd
    return best_x, best_f
