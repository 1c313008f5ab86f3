"""Small numerical kernels: normal quantile, root finding, line search, quadrature."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc

from .errors import NonConvergence

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)

# Acklam's rational approximation coefficients
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def norm_cdf(x):
    return 0.5 * erfc(-np.asarray(x, dtype=float) / SQRT2)


def norm_sf(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / SQRT2)


def _acklam(p):
    x = np.empty_like(p)
    lo = p < _P_LOW
    hi = p > 1.0 - _P_LOW
    mid = ~(lo | hi)
    if lo.any():
        q = np.sqrt(-2.0 * np.log(p[lo]))
        x[lo] = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                 / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    if hi.any():
        q = np.sqrt(-2.0 * np.log1p(-p[hi]))
        x[hi] = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                  / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    if mid.any():
        q = p[mid] - 0.5
        r = q * q
        x[mid] = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
                  / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    return x


def norm_ppf(p):
    """Standard normal quantile.

    Acklam's rational approximation (relative error about 1e-9) followed by
    one Halley correction step, which brings the error to machine precision.
    Accepts scalars or arrays; returns -inf/inf at 0/1.
    """
    arr = np.asarray(p, dtype=float)
    scalar = arr.ndim == 0
    p = np.atleast_1d(arr).copy()
    out = np.full(p.shape, np.nan)
    ok = (p > 0.0) & (p < 1.0)
    out[p == 0.0] = -np.inf
    out[p == 1.0] = np.inf
    if ok.any():
        pp = p[ok]
        x = _acklam(pp)
        # Halley step; use the upper tail for p > 1/2 to keep relative accuracy
        upper = pp > 0.5
        # both branches compute Phi(x) - p
        e = np.where(upper, (1.0 - pp) - norm_sf(x), norm_cdf(x) - pp)
        u = e * SQRT2PI * np.exp(0.5 * x * x)
        x = x - u / (1.0 + 0.5 * x * u)
        out[ok] = x
    return float(out[0]) if scalar else out


def golden_section(f, a, b, tol=1e-10, max_iter=500):
    """Minimise a unimodal scalar function on [a, b].

    Infinite function values are treated as infeasible probes (larger than
    any finite value). Returns (x, f(x), iterations).
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while abs(b - a) > tol * max(1.0, abs(c) + abs(d)):
        it += 1
        if it > max_iter:
            raise NonConvergence(f"golden section did not converge in {max_iter} iterations")
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    if fc <= fd:
        return c, fc, it
    return d, fd, it


def bracketed_newton(fun, lo, hi, xtol=1e-12, rtol=1e-12, max_iter=200):
    """Root of a scalar function with a sign change on [lo, hi].

    ``fun(x)`` returns (value, derivative). Newton steps are taken when they
    stay inside the current bracket and shrink it fast enough; otherwise the
    step falls back to bisection.
    """
    flo, _ = fun(lo)
    fhi, _ = fun(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise NonConvergence("root not bracketed")
    rising = fhi > 0
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx, dfx = fun(x)
        if fx == 0.0:
            return x
        if (fx > 0) == rising:
            hi = x
        else:
            lo = x
        if hi - lo <= xtol + rtol * abs(x):
            return 0.5 * (lo + hi)
        step_ok = dfx != 0.0 and np.isfinite(dfx) and np.isfinite(fx)
        if step_ok:
            xn = x - fx / dfx
            if not (lo < xn < hi):
                step_ok = False
        if step_ok:
            if abs(xn - x) <= 0.5 * (xtol + rtol * abs(xn)):
                return xn
            x = xn
        else:
            x = 0.5 * (lo + hi)
    raise NonConvergence(f"bracketed Newton did not converge in {max_iter} iterations")


def invert_decreasing(sf, beta, lo=0.0, hi=1.0, rtol=1e-10, max_doublings=200):
    """Vectorised generalised inverse inf{x >= lo : sf(x) <= beta}.

    ``sf`` must be nonincreasing. The upper end of the final bracket is
    returned, so sf(result) <= beta always holds.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    lo_arr = np.broadcast_to(np.asarray(lo, dtype=float), beta.shape).copy()
    hi_arr = np.broadcast_to(np.asarray(hi, dtype=float), beta.shape).copy()
    for _ in range(max_doublings):
        bad = sf(hi_arr) > beta
        if not bad.any():
            break
        lo_arr = np.where(bad, hi_arr, lo_arr)
        hi_arr = np.where(bad, 2.0 * hi_arr, hi_arr)
    else:
        raise NonConvergence(f"no bracket after {max_doublings} doublings")
    for _ in range(400):
        width = hi_arr - lo_arr
        active = width > rtol * np.abs(hi_arr)
        if not active.any():
            break
        mid = lo_arr + 0.5 * width
        above = sf(mid) > beta
        lo_arr = np.where(active & above, mid, lo_arr)
        hi_arr = np.where(active & ~above, mid, hi_arr)
    return hi_arr


def solve_increasing(fun, target, lo, hi, rtol=1e-13, atol=0.0, max_iter=200):
    """Vectorised safeguarded Newton for fun(x) = target with fun increasing.

    ``fun(x)`` returns (value, derivative) arrays. The caller supplies a
    bracket lo <= root <= hi for every entry. Converged entries are dropped
    from the working set.
    """
    target = np.atleast_1d(np.asarray(target, dtype=float))
    lo = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    out = 0.5 * (lo + hi)
    idx = np.arange(target.size)
    x, t = out.copy(), target
    for _ in range(max_iter):
        g, dg = fun(x)
        g = g - t
        lo = np.where(g < 0, x, lo)
        hi = np.where(g > 0, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - g / dg
        bad = ~np.isfinite(xn) | (xn < lo) | (xn > hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        xn = np.where(g == 0, x, xn)
        tol = atol + rtol * np.abs(xn)
        done = (np.abs(xn - x) <= tol) | (g == 0) | (hi - lo <= tol)
        out[idx] = xn
        if done.all():
            return out
        keep = ~done
        idx, x, t, lo, hi = idx[keep], xn[keep], t[keep], lo[keep], hi[keep]
    raise NonConvergence(f"vectorised Newton did not converge in {max_iter} iterations")


_GL_CACHE = {}


def _gl(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def integrate(f, a, b, rtol=1e-10, atol=0.0, max_segments=4000):
    """Adaptive Gauss-Legendre quadrature of a vectorised integrand on [a, b].

    Each segment compares a 15-point and a 30-point rule and is split in
    half until the two agree. Returns the integral estimate.
    """
    x15, w15 = _gl(15)
    x30, w30 = _gl(30)

    def rule(lo, hi, x, w):
        half = 0.5 * (hi - lo)
        return half * np.dot(w, f(lo + half * (x + 1.0)))

    stack = [(a, b)]
    total = 0.0
    pieces = []
    count = 0
    while stack:
        lo, hi = stack.pop()
        count += 1
        if count > max_segments:
            raise NonConvergence("adaptive quadrature exceeded segment budget")
        coarse = rule(lo, hi, x15, w15)
        fine = rule(lo, hi, x30, w30)
        if not np.isfinite(fine):
            raise NonConvergence("non-finite integrand value")
        err = abs(fine - coarse)
        scale = abs(total) + abs(fine)
        if err <= max(atol * (hi - lo) / max(b - a, 1e-300), rtol * scale) or hi - lo < 1e-13 * max(1.0, abs(lo)):
            pieces.append(fine)
            total += fine
        else:
            mid = 0.5 * (lo + hi)
            stack.append((mid, hi))
            stack.append((lo, mid))
    return math.fsum(pieces)
