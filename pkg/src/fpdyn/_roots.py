"""Bracketed scalar root finding: Newton steps guarded by bisection."""

from __future__ import annotations

from .errors import SearchError


def bracketed_newton(f, df, lo, hi, tol_resid=1e-14, max_iter=200):
    """Root of f in [lo, hi]; f(lo) and f(hi) must have opposite signs.

    Takes Newton steps while they stay inside the bracket, bisection
    otherwise; converges to |f| <= tol_resid * scale.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise SearchError(f"no sign change on [{lo}, {hi}]")
    scale = max(abs(flo), abs(fhi), 1.0)
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = f(x)
        if abs(fx) <= tol_resid * scale:
            return x
        if fx * flo < 0.0:
            hi = x
        else:
            lo, flo = x, fx
        d = df(x)
        step_ok = d != 0.0
        if step_ok:
            xn = x - fx / d
            step_ok = lo < xn < hi
        x = xn if step_ok else 0.5 * (lo + hi)
        if hi - lo < 1e-16 * max(1.0, abs(x)):
            return x
    return x


def bisect(f, lo, hi, tol=1e-12, max_iter=200):
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise SearchError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < tol:
            return mid
        if fm * flo < 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)
