"""Standard-normal helpers with log-domain tail machinery.

The closed-form agent solution composes the normal cdf and quantile at
arguments that grow linearly in the signal-to-noise ratio, so naive
evaluation underflows well before the parameter ranges the sweeps need.
Everything here is vectorized numpy and accepts scalars or arrays.

The cdf rides on the error function (scipy.special.erfc); the quantile is
a rational initial guess refined by two Newton steps on the cdf; tails
beyond the reach of erfc use a continued fraction for the Mills ratio.
"""

import numpy as np
from scipy.special import erf, erfc

_SQRT2 = np.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

# erfc(x/sqrt(2)) underflows near x ~ 37.5; switch to the continued
# fraction comfortably before that.
_TAIL_SWITCH = 12.0
_CF_DEPTH = 128


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def log_norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return -0.5 * x * x - _LOG_SQRT_2PI


def norm_cdf(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * erfc(-x / _SQRT2)


def norm_sf(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * erfc(x / _SQRT2)


def _mills_cf(x):
    """Mills ratio sf(x)/pdf(x) by continued fraction; accurate for x >= ~8."""
    x = np.asarray(x, dtype=float)
    v = np.zeros_like(x)
    for k in range(_CF_DEPTH, 0, -1):
        v = k / (x + v)
    return 1.0 / (x + v)


def mills_ratio(x):
    """sf(x)/pdf(x) for x > 0, stable for arbitrarily large x."""
    x = np.asarray(x, dtype=float)
    safe = np.minimum(x, _TAIL_SWITCH)
    direct = norm_sf(safe) / norm_pdf(safe)
    return np.where(x <= _TAIL_SWITCH, direct, _mills_cf(np.maximum(x, _TAIL_SWITCH)))


def log_norm_sf(x):
    """log of the upper-tail mass, full double-exponent range."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    body = np.minimum(ax, _TAIL_SWITCH)
    log_body = np.log(0.5 * erfc(body / _SQRT2))
    log_tail = log_norm_pdf(ax) + np.log(_mills_cf(np.maximum(ax, _TAIL_SWITCH)))
    log_upper = np.where(ax <= _TAIL_SWITCH, log_body, log_tail)
    # x < 0: sf(x) = 1 - sf(-x)
    return np.where(x >= 0.0, log_upper, np.log1p(-np.exp(log_upper)))


def log_norm_cdf(x):
    return log_norm_sf(-np.asarray(x, dtype=float))


# Rational approximation constants for the quantile initial guess
# (Acklam's algorithm, refined below to full double accuracy).
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def _ppf_initial(p):
    p = np.asarray(p, dtype=float)
    out = np.empty_like(p)

    lo = p < _P_LOW
    hi = p > 1.0 - _P_LOW
    mid = ~(lo | hi)

    if np.any(mid):
        q = p[mid] - 0.5
        r = q * q
        num = ((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        out[mid] = q * num / den
    if np.any(lo):
        q = np.sqrt(-2.0 * np.log(p[lo]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        out[lo] = num / den
    if np.any(hi):
        q = np.sqrt(-2.0 * np.log(1.0 - p[hi]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        out[hi] = -num / den
    return out


def norm_ppf(p):
    """Standard-normal quantile, |error| < 1e-9 over [1e-12, 1-1e-12].

    Rational initial guess plus two Newton refinements against the
    erfc-based cdf; the residual is evaluated in whichever tail keeps the
    subtraction cancellation-free.
    """
    p = np.asarray(p, dtype=float)
    scalar = p.ndim == 0
    p = np.atleast_1d(p)
    x = _ppf_initial(p)
    for _ in range(2):
        err = np.where(p <= 0.5, norm_cdf(x) - p, (1.0 - p) - norm_sf(x))
        x = x - err / norm_pdf(x)
    return float(x[0]) if scalar else x


def norm_isf_log(l):
    """x such that log(sf(x)) == l, for any l < 0 down past -1e7.

    Shallow arguments route through the quantile; deep tails solve
    log(sf(x)) = l by Newton with the Mills ratio as slope.
    """
    l = np.asarray(l, dtype=float)
    scalar = l.ndim == 0
    l = np.atleast_1d(l)
    out = np.empty_like(l)

    deep = l < -600.0
    shallow = ~deep
    if np.any(shallow):
        ls = l[shallow]
        p = np.exp(ls)
        upper = p <= 0.5
        res = np.empty_like(ls)
        if np.any(upper):
            res[upper] = -norm_ppf(p[upper])
        if np.any(~upper):
            res[~upper] = norm_ppf(-np.expm1(ls[~upper]))
        out[shallow] = res
    if np.any(deep):
        ld = l[deep]
        lt = -(ld + _LOG_SQRT_2PI)
        x = np.sqrt(2.0 * lt)
        for _ in range(2):
            x = np.sqrt(2.0 * (lt - np.log(x)))
        for _ in range(4):
            x = x + (log_norm_sf(x) - ld) * mills_ratio(x)
        out[deep] = x
    return float(out[0]) if scalar else out


def log_norm_cdf_diff(lo, hi):
    """log(cdf(hi) - cdf(lo)) for hi >= lo without catastrophic cancellation.

    Same-sign tails subtract in log space; straddling pairs use the erf
    difference, which adds in magnitude across zero.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    scalar = lo.ndim == 0 and hi.ndim == 0
    lo, hi = np.broadcast_arrays(np.atleast_1d(lo), np.atleast_1d(hi))
    out = np.full(lo.shape, -np.inf)

    right = lo >= 0.0
    left = hi <= 0.0
    straddle = ~(right | left)
    equal = hi <= lo

    with np.errstate(divide="ignore"):
        if np.any(right):
            a, b = lo[right], hi[right]
            la, lb = log_norm_sf(a), log_norm_sf(b)
            out[right] = la + np.log1p(-np.exp(np.minimum(lb - la, 0.0)))
        if np.any(left):
            a, b = lo[left], hi[left]
            la, lb = log_norm_cdf(a), log_norm_cdf(b)
            out[left] = lb + np.log1p(-np.exp(np.minimum(la - lb, 0.0)))
    if np.any(straddle):
        a, b = lo[straddle], hi[straddle]
        out[straddle] = np.log(0.5 * (erf(b / _SQRT2) - erf(a / _SQRT2)))
    out[equal] = -np.inf
    return float(out[0]) if scalar else out
