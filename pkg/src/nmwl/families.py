"""Reduced-statistic sampling families.

Two families are bundled:

* ``NormalKnownScale`` -- the statistic is ``N(theta, sigma**2)`` with known
  ``sigma``; parameter space is the real line.
* ``FoldedNoncentralT`` -- the statistic is the absolute value of an
  equal-variance two-sample t statistic with group sizes ``(m, n)``;
  ``theta`` is the absolute inverse coefficient of variation, the
  noncentrality is ``theta / sqrt(1/m + 1/n)`` and the degrees of freedom
  are ``m + n - 2``.

The folded noncentral-t density has the closed series form

    g(t) = 2 f_nu(t) exp(-delta**2 / 2) 1F1((nu + 1)/2; 1/2; z),
    z = delta**2 t**2 / (2 (nu + t**2)),

where ``f_nu`` is the central t density; the odd part of the noncentral
density cancels under folding.  The hypergeometric series has positive
terms only, so it is summed in log space around its largest term.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .errors import (
    DegenerateVariance,
    DivergentExpectation,
    InvalidParameter,
    NumericalFailure,
    OutOfSupport,
)

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# Above this value of z the series needs thousands of terms; use quadrature.
SERIES_Z_MAX = 1.0e4
SERIES_RTOL = 1.0e-10
# scipy's hyp1f1 is used below this argument; the log-space series above it
KUMMER_DIRECT_MAX = 500.0
SERIES_CHUNK = 256


class Kind(enum.Enum):
    NORMAL = "normal"
    FOLDED_T = "folded-t"


@dataclass(frozen=True)
class FamilyInstance:
    """A per-comparison sampling model ``g_theta`` for a reduced statistic."""

    kind: Kind
    scale: float | None = None
    group_sizes: tuple[int, int] | None = None

    def __post_init__(self):
        if self.kind is Kind.NORMAL:
            if self.scale is None or not np.isfinite(self.scale) or self.scale <= 0:
                raise InvalidParameter(f"normal family needs scale > 0, got {self.scale!r}")
            object.__setattr__(self, "scale", float(self.scale))
        elif self.kind is Kind.FOLDED_T:
            if self.group_sizes is None or len(self.group_sizes) != 2:
                raise InvalidParameter("folded-t family needs group_sizes=(m, n)")
            m, n = (int(v) for v in self.group_sizes)
            if m < 2 or n < 2:
                raise InvalidParameter(f"folded-t family needs m, n >= 2, got {(m, n)}")
            object.__setattr__(self, "group_sizes", (m, n))
        else:  # pragma: no cover
            raise InvalidParameter(f"unknown family kind {self.kind!r}")

    @classmethod
    def normal(cls, sigma: float) -> "FamilyInstance":
        return cls(Kind.NORMAL, scale=sigma)

    @classmethod
    def folded_t(cls, m: int, n: int) -> "FamilyInstance":
        return cls(Kind.FOLDED_T, group_sizes=(m, n))

    @property
    def df(self) -> int:
        m, n = self.group_sizes
        return m + n - 2

    @property
    def ncp_factor(self) -> float:
        """Multiplier turning an inverse CV into a noncentrality."""
        m, n = self.group_sizes
        return (1.0 / m + 1.0 / n) ** -0.5

    @property
    def support(self) -> tuple[float, float]:
        if self.kind is Kind.NORMAL:
            return (-math.inf, math.inf)
        return (0.0, math.inf)

    @property
    def theta_bounds(self) -> tuple[float, float]:
        return self.support

    @property
    def default_sample_size(self) -> int:
        if self.kind is Kind.NORMAL:
            return 1
        return sum(self.group_sizes)

    def scale_hint(self) -> float:
        """Typical spread of the statistic, used to size brackets and windows."""
        return self.scale if self.kind is Kind.NORMAL else 1.0

    def theta_scale_hint(self) -> float:
        """Typical spread of estimates of ``theta``."""
        return self.scale if self.kind is Kind.NORMAL else 1.0 / self.ncp_factor


@dataclass(frozen=True)
class ReducedObservation:
    statistic: float
    family: FamilyInstance
    sample_size: int | None = None
    id: str = ""
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        lo, hi = self.family.support
        t = float(self.statistic)
        if not (lo <= t <= hi) or math.isnan(t):
            raise OutOfSupport(f"statistic {t} outside support {self.family.support}")
        object.__setattr__(self, "statistic", t)
        n = self.family.default_sample_size if self.sample_size is None else int(self.sample_size)
        if n < 1:
            raise InvalidParameter(f"sample_size must be >= 1, got {n}")
        object.__setattr__(self, "sample_size", n)


# ---------------------------------------------------------------------------
# noncentral t machinery


def _log_central_t(t, df):
    a = 0.5 * (df + 1.0)
    return (special.gammaln(a) - special.gammaln(0.5 * df) - 0.5 * np.log(df * np.pi)
            - a * np.log1p(t * t / df))


def _log_kummer_half_block(z, a, rtol=SERIES_RTOL):
    """``log 1F1(a; 1/2; z)`` for ``z >= 0`` by a log-space term sum.

    Terms are ``c_j = z**j (a)_j / ((1/2)_j j!)``.  Summation runs outward
    from the largest term using the ratio ``c_{j+1}/c_j``, so every summand
    is at most 1 relative to the peak.  The neglected tails are bounded by
    geometric series; a window that misses ``rtol`` is widened twice before
    giving up.
    """
    z, a = np.broadcast_arrays(np.asarray(z, dtype=float), np.asarray(a, dtype=float))
    out = np.zeros(z.shape)
    pos = z > 0
    if not pos.any():
        return out
    zp, ap = z[pos], a[pos]
    b = zp - 1.5
    disc = np.maximum(b * b - 4.0 * (0.5 - zp * ap), 0.0)
    jstar = np.floor(np.maximum(0.0, 0.5 * (b + np.sqrt(disc))))
    curv = 1.0 / (jstar + 1.0) + 1.0 / (jstar + 0.5) - 1.0 / (jstar + ap)
    spread = 1.0 / np.sqrt(np.maximum(curv, 1e-300))
    log_peak = (jstar * np.log(zp) + special.gammaln(jstar + ap) - special.gammaln(jstar + 0.5)
                - special.gammaln(jstar + 1.0) + special.gammaln(0.5) - special.gammaln(ap))

    def ratio(j):
        return zp[:, None] * (j + ap[:, None]) / ((j + 1.0) * (j + 0.5))

    widen = 8.0
    for _ in range(3):
        half = int(np.ceil((widen * spread + 8.0).max()))
        k = np.arange(1, half + 1, dtype=float)[None, :]
        up = np.cumprod(ratio(jstar[:, None] + k - 1.0), axis=1)
        jd = jstar[:, None] - k
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            down = np.cumprod(np.where(jd >= 0, 1.0 / ratio(np.maximum(jd, 0.0)), 0.0), axis=1)
        total = 1.0 + up.sum(axis=1) + down.sum(axis=1)

        r_hi = ratio(jstar[:, None] + half)[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            upper = np.where(r_hi < 1.0, up[:, -1] * r_hi / (1.0 - r_hi), np.inf)
            j_lo = jstar - half
            q = np.where(j_lo > 0, 1.0 / ratio(np.maximum(j_lo - 1.0, 0.0)[:, None])[:, 0], 0.0)
            lower = np.where(j_lo > 0, np.where(q < 1.0, down[:, -1] * q / (1.0 - q), np.inf), 0.0)
        if np.all(upper + lower <= rtol * total):
            out[pos] = log_peak + np.log(total)
            return out
        widen *= 2.0
    raise NumericalFailure("noncentral-t series failed to reach relative tolerance")


def _log_kummer_half(z, a, rtol=SERIES_RTOL):
    """Series route for ``log 1F1(a; 1/2; z)``, in row chunks to bound memory."""
    z, a = np.broadcast_arrays(np.asarray(z, dtype=float), np.asarray(a, dtype=float))
    if z.size <= SERIES_CHUNK:
        return _log_kummer_half_block(z, a, rtol)
    zf, af = z.ravel(), a.ravel()
    out = np.empty(zf.shape)
    for s in range(0, zf.size, SERIES_CHUNK):
        out[s:s + SERIES_CHUNK] = _log_kummer_half_block(zf[s:s + SERIES_CHUNK],
                                                         af[s:s + SERIES_CHUNK], rtol)
    return out.reshape(z.shape)


def log_kummer_half(z, a):
    """``log 1F1(a; 1/2; z)`` for ``z >= 0``.

    scipy's ``hyp1f1`` where it is finite and ``z`` is moderate, the
    log-space series elsewhere (the two agree to ~1e-14 where both apply).
    """
    z, a = np.broadcast_arrays(np.asarray(z, dtype=float), np.asarray(a, dtype=float))
    with np.errstate(all="ignore"):
        out = np.log(special.hyp1f1(a, 0.5, z))
    bad = ~np.isfinite(out) | (z > KUMMER_DIRECT_MAX)
    if bad.any():
        out = np.array(out, dtype=float)
        out[bad] = _log_kummer_half(z[bad], a[bad])
    return out


def _nct_log_pdf_quad_scalar(t, df, ncp):
    """log f_T(t; df, ncp) by quadrature of the defining mixture integral.

    ``f_T(t) = int_0^inf phi(t sqrt(v/df) - ncp) sqrt(v/df) chi2_df(v) dv``.
    The integrand is rescaled by its peak before integrating.
    """
    c = 0.5 * df * math.log(2.0) + math.lgamma(0.5 * df)
    log_df = math.log(df)

    # integrate over u = log v, where the integrand is a single smooth bump;
    # written in u so that no intermediate underflows
    def g(u):
        log_s = 0.5 * (u - log_df)
        d = t * math.exp(min(log_s, 300.0)) - ncp
        return (-0.5 * d * d - LOG_SQRT_2PI + log_s
                + 0.5 * df * u - 0.5 * math.exp(min(u, 700.0)) - c)

    res = optimize.minimize_scalar(lambda u: -g(u), bounds=(-120.0, 40.0), method="bounded",
                                   options={"xatol": 1e-10})
    u0 = res.x
    peak = g(u0)
    eps = 1e-4
    curv = -(g(u0 + eps) - 2.0 * peak + g(u0 - eps)) / eps ** 2
    h = 1.0 / math.sqrt(max(curv, 1e-8))
    marks = u0 + h * np.array([-60.0, -30.0, -15.0, -8.0, -4.0, -2.0, 0.0, 2.0, 4.0, 8.0, 15.0, 30.0])

    def f(u):
        return math.exp(g(u) - peak)

    total = 0.0
    with warnings.catch_warnings():
        # roundoff warnings at this tolerance concern the last digit or two only
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(marks[:-1], marks[1:]):
            val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-13, limit=200)
            total += val
    if not total > 0.0:
        return -math.inf
    return peak + math.log(total)


def noncentral_t_log_pdf_quad(t, df, ncp):
    """Noncentral-t log density by direct quadrature (slow, independent route)."""
    t, df, ncp = np.broadcast_arrays(np.asarray(t, float), np.asarray(df, float),
                                     np.asarray(ncp, float))
    out = np.empty(t.shape)
    for idx in np.ndindex(t.shape):
        out[idx] = _nct_log_pdf_quad_scalar(float(t[idx]), float(df[idx]), float(ncp[idx]))
    return out if out.ndim else float(out)


def folded_noncentral_t_log_pdf(t, df, ncp):
    """Log density of ``|T|`` for ``T`` noncentral t with ``df`` and ``ncp``.

    Vectorised over broadcastable arguments.  Equals
    ``log(f_T(t) + f_T(-t))``; for ``ncp = 0`` this is ``log 2 + log f_T(t)``.
    """
    t, df, ncp = np.broadcast_arrays(np.asarray(t, float), np.asarray(df, float),
                                     np.asarray(ncp, float))
    if np.any(t < 0):
        raise OutOfSupport("folded t density is supported on t >= 0")
    if np.any(df < 1):
        raise InvalidParameter("df must be >= 1")
    tt = t * t
    z = 0.5 * ncp * ncp * tt / (df + tt)
    base = math.log(2.0) + _log_central_t(t, df) - 0.5 * ncp * ncp
    out = np.empty(t.shape)
    small = z <= SERIES_Z_MAX
    if small.all():
        out = base + log_kummer_half(z, 0.5 * (df + 1.0))
    else:
        out[small] = base[small] + log_kummer_half(z[small], 0.5 * (df[small] + 1.0))
        for idx in zip(*np.nonzero(~small)):
            tv, dv, nv = float(t[idx]), float(df[idx]), float(ncp[idx])
            out[idx] = np.logaddexp(_nct_log_pdf_quad_scalar(tv, dv, nv),
                                    _nct_log_pdf_quad_scalar(-tv, dv, nv))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# family-level operations


def noncentrality(family: FamilyInstance, theta):
    if family.kind is not Kind.FOLDED_T:
        raise InvalidParameter("noncentrality is defined for the folded-t family only")
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise InvalidParameter("theta must be >= 0 for the folded-t family")
    out = family.ncp_factor * theta
    return out if out.ndim else float(out)


def _check_theta(family, theta):
    lo, hi = family.theta_bounds
    theta = np.asarray(theta, dtype=float)
    if np.any(np.isnan(theta)) or np.any(theta < lo) or np.any(theta > hi):
        raise InvalidParameter(f"theta outside {family.theta_bounds}")
    return theta


def log_density(family: FamilyInstance, theta, t):
    """``log g_theta(t)`` for one family instance (vectorised over theta and t)."""
    theta = _check_theta(family, theta)
    t = np.asarray(t, dtype=float)
    lo, hi = family.support
    if np.any(np.isnan(t)) or np.any(t < lo) or np.any(t > hi):
        raise OutOfSupport(f"t outside support {family.support}")
    if family.kind is Kind.NORMAL:
        s = family.scale
        out = -LOG_SQRT_2PI - math.log(s) - 0.5 * ((t - theta) / s) ** 2
        return out if np.ndim(out) else float(out)
    return folded_noncentral_t_log_pdf(t, family.df, family.ncp_factor * theta)


def null_pseudo_statistic(family: FamilyInstance, theta0: float = 0.0) -> float:
    """Expectation of the statistic under ``theta0``."""
    theta0 = float(_check_theta(family, theta0))
    if family.kind is Kind.NORMAL:
        return theta0
    df = family.df
    if df <= 1:
        raise DivergentExpectation("E|T| is infinite for df <= 1")
    if theta0 == 0.0:
        return float(2.0 * math.sqrt(df) * math.exp(math.lgamma(0.5 * (df + 1)) - math.lgamma(0.5 * df))
                     / (math.sqrt(math.pi) * (df - 1)))
    ncp = family.ncp_factor * theta0

    def f(t):
        return t * math.exp(folded_noncentral_t_log_pdf(t, df, ncp))

    mid = ncp + 10.0
    a, _ = integrate.quad(f, 0.0, mid, epsabs=0.0, epsrel=1e-11, limit=200)
    b, _ = integrate.quad(f, mid, np.inf, epsabs=0.0, epsrel=1e-11, limit=200)
    return float(a + b)


def reduce_two_sample(x, y, id: str = "", sample_size: int | None = None) -> ReducedObservation:
    """Absolute equal-variance two-sample t statistic of ``x`` versus ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = x.size, y.size
    if m < 2 or n < 2:
        raise InvalidParameter(f"need at least 2 values per group, got {(m, n)}")
    ss = ((x - x.mean()) ** 2).sum() + ((y - y.mean()) ** 2).sum()
    pooled = ss / (m + n - 2)
    if not pooled > 0:
        raise DegenerateVariance(f"pooled variance is zero{' for ' + id if id else ''}")
    t = (x.mean() - y.mean()) / math.sqrt(pooled * (1.0 / m + 1.0 / n))
    return ReducedObservation(abs(float(t)), FamilyInstance.folded_t(m, n),
                              sample_size=sample_size, id=id)


def sample_statistic(family: FamilyInstance, theta: float, rng: np.random.Generator, size=None):
    """Draw statistics from ``g_theta`` using the caller's generator."""
    theta = float(_check_theta(family, theta))
    if family.kind is Kind.NORMAL:
        return theta + family.scale * rng.standard_normal(size)
    df = family.df
    ncp = family.ncp_factor * theta
    z = rng.standard_normal(size)
    v = rng.chisquare(df, size)
    return np.abs((z + ncp) / np.sqrt(v / df))


def folded_t_log_pdf_arrays(t, df, ncp):
    """Unchecked vectorised folded-t log density used on hot paths."""
    tt = t * t
    z = 0.5 * ncp * ncp * tt / (df + tt)
    base = math.log(2.0) + _log_central_t(t, df) - 0.5 * ncp * ncp
    if np.all(z <= SERIES_Z_MAX):
        return base + log_kummer_half(z, 0.5 * (df + 1.0))
    return folded_noncentral_t_log_pdf(t, df, ncp)
