"""Weighted log-likelihood and its maximizer over a parameter space."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DimensionMismatch, InvalidParameter, OptimizerFailure, WrongFamily
from .families import (
    LOG_SQRT_2PI,
    SERIES_Z_MAX,
    FamilyInstance,
    Kind,
    ReducedObservation,
    folded_t_log_pdf_arrays,
    log_kummer_half,
)
from .weights import WeightRow

GOLDEN = 0.3819660112501051


@dataclass(frozen=True)
class ComparisonSet:
    """Observed statistics ``t_1..t_N`` with their families and sample sizes."""

    observations: tuple[ReducedObservation, ...]

    def __post_init__(self):
        obs = tuple(self.observations)
        if not obs:
            raise DimensionMismatch("a comparison set needs at least one observation")
        kinds = {o.family.kind for o in obs}
        if len(kinds) != 1:
            raise WrongFamily("all comparisons must share one family kind")
        object.__setattr__(self, "observations", obs)

    @classmethod
    def from_arrays(cls, statistics, families, sample_sizes=None, ids=None) -> "ComparisonSet":
        statistics = list(np.asarray(statistics, dtype=float).ravel())
        N = len(statistics)
        if isinstance(families, FamilyInstance):
            families = [families] * N
        if sample_sizes is None:
            sample_sizes = [None] * N
        if ids is None:
            ids = [str(j + 1) for j in range(N)]
        if not (len(families) == len(sample_sizes) == len(ids) == N):
            raise DimensionMismatch("statistics, families, sample sizes and ids differ in length")
        return cls(tuple(ReducedObservation(t, f, n, str(k))
                         for t, f, n, k in zip(statistics, families, sample_sizes, ids)))

    @classmethod
    def normal(cls, statistics, sigmas, sample_sizes=None, ids=None) -> "ComparisonSet":
        sigmas = np.broadcast_to(np.asarray(sigmas, dtype=float), np.shape(statistics))
        return cls.from_arrays(statistics, [FamilyInstance.normal(s) for s in sigmas],
                               sample_sizes, ids)

    def __len__(self):
        return len(self.observations)

    def __getitem__(self, i):
        return self.observations[i]

    @property
    def kind(self) -> Kind:
        return self.observations[0].family.kind

    @property
    def statistics(self) -> np.ndarray:
        return np.array([o.statistic for o in self.observations])

    @property
    def sample_sizes(self) -> list[int]:
        return [o.sample_size for o in self.observations]

    @property
    def ids(self) -> list[str]:
        return [o.id for o in self.observations]

    def family(self, i) -> FamilyInstance:
        return self.observations[i].family

    def substitute(self, i, t) -> "ComparisonSet":
        o = self.observations[i]
        new = ReducedObservation(t, o.family, o.sample_size, o.id)
        return ComparisonSet(self.observations[:i] + (new,) + self.observations[i + 1:])


class SpaceKind(enum.Enum):
    FULL_LINE = "full-line"
    HALF_LINE_NONNEG = "half-line"
    SINGLETON = "singleton"
    PUNCTURED = "punctured"
    BOUNDED = "bounded"


@dataclass(frozen=True)
class ParameterSpace:
    """Hypothesis set over which the weighted likelihood is maximized.

    Punctured spaces are handled through their closure: removing one point
    changes neither a supremum of a continuous function nor an integral.
    """

    kind: SpaceKind
    point: float | None = None
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if self.kind in (SpaceKind.SINGLETON, SpaceKind.PUNCTURED):
            if self.point is None or not math.isfinite(self.point):
                raise InvalidParameter(f"{self.kind.value} space needs a finite point")
        if self.kind is SpaceKind.BOUNDED:
            if self.lo is None or self.hi is None or not self.lo < self.hi:
                raise InvalidParameter("bounded space needs lo < hi")

    @classmethod
    def full_line(cls):
        return cls(SpaceKind.FULL_LINE)

    @classmethod
    def half_line(cls):
        return cls(SpaceKind.HALF_LINE_NONNEG)

    @classmethod
    def singleton(cls, theta0: float):
        return cls(SpaceKind.SINGLETON, point=float(theta0))

    @classmethod
    def punctured(cls, point: float):
        return cls(SpaceKind.PUNCTURED, point=float(point))

    @classmethod
    def bounded(cls, lo: float, hi: float):
        return cls(SpaceKind.BOUNDED, lo=float(lo), hi=float(hi))

    @property
    def label(self) -> str:
        if self.kind is SpaceKind.SINGLETON:
            return f"{{{self.point:g}}}"
        if self.kind is SpaceKind.PUNCTURED:
            return f"R\\{{{self.point:g}}}"
        if self.kind is SpaceKind.BOUNDED:
            return f"[{self.lo:g},{self.hi:g}]"
        return self.kind.value

    def closure_bounds(self, family: FamilyInstance) -> tuple[float, float]:
        """Closure of this space intersected with the family's parameter range."""
        flo, fhi = family.theta_bounds
        if self.kind is SpaceKind.SINGLETON:
            if not flo <= self.point <= fhi:
                raise InvalidParameter(f"point {self.point} outside the family's parameter range")
            return (self.point, self.point)
        if self.kind is SpaceKind.HALF_LINE_NONNEG:
            lo, hi = 0.0, math.inf
        elif self.kind is SpaceKind.BOUNDED:
            lo, hi = self.lo, self.hi
        else:
            lo, hi = -math.inf, math.inf
        lo, hi = max(lo, flo), min(hi, fhi)
        if lo > hi:
            raise InvalidParameter(f"space {self.label} does not meet the family's parameter range")
        return (lo, hi)

    def key(self):
        return (self.kind.value, self.point, self.lo, self.hi)


@dataclass(frozen=True)
class OptimConfig:
    theta_tol: float = 1e-9
    max_expansions: int = 60
    grid_points: int = 33
    max_iter: int = 500
    # "auto" maximizes normal-family objectives in closed form; "numeric" never does
    method: str = "auto"

    def __post_init__(self):
        if self.theta_tol <= 0 or self.max_expansions < 1 or self.grid_points < 3:
            raise InvalidParameter("invalid optimizer configuration")
        if self.method not in ("auto", "numeric"):
            raise InvalidParameter(f"unknown optimizer method {self.method!r}")


@dataclass(frozen=True)
class WeightedMleResult:
    theta_hat: float
    max_log_wlik: float
    at_boundary: bool
    iterations: int


class Terms:
    """Nonzero-weight terms of one weighted likelihood as flat arrays.

    The pseudo-statistic, when present, is an extra term under the focus
    comparison's family.  ``focus`` is the position of the focus term, whose
    statistic can be replaced on the fly for profile evaluations.
    """

    def __init__(self, row: WeightRow, obs: ComparisonSet):
        N = len(obs)
        if len(row.weights) != N:
            raise DimensionMismatch(f"weight row has {len(row.weights)} entries, comparison set {N}")
        i = row.focus_index
        if not 0 <= i < N:
            raise DimensionMismatch(f"focus index {i} outside the comparison set")
        keep = [j for j in range(N) if row.weights[j] != 0.0 or j == i]
        fams = [obs.family(j) for j in keep]
        t = [obs[j].statistic for j in keep]
        w = [row.weights[j] for j in keep]
        if row.has_pseudo and row.pseudo_weight != 0.0:
            fams.append(obs.family(i))
            t.append(row.pseudo_statistic)
            w.append(row.pseudo_weight)
        self.kind = obs.kind
        self.focus = keep.index(i)
        self.focus_family = obs.family(i)
        self.t = np.array(t, dtype=float)
        self.w = np.array(w, dtype=float)
        if self.kind is Kind.NORMAL:
            self.sigma = np.array([f.scale for f in fams])
            self.const = float(np.sum(self.w * (-LOG_SQRT_2PI - np.log(self.sigma))))
            self.prec = self.w / self.sigma ** 2
        else:
            self.df = np.array([f.df for f in fams], dtype=float)
            self.ncpf = np.array([f.ncp_factor for f in fams])
            self.half_df1 = 0.5 * (self.df + 1.0)
            self.log_norm = (math.log(2.0) + special.gammaln(self.half_df1)
                             - special.gammaln(0.5 * self.df) - 0.5 * np.log(self.df * np.pi))

    def with_focus(self, t_focus):
        t = self.t.copy()
        t[self.focus] = t_focus
        return t

    def loglik(self, theta, t=None):
        """Weighted log-likelihood at each value of ``theta`` (scalar or 1-d)."""
        t = self.t if t is None else t
        theta = np.asarray(theta, dtype=float)
        th = theta[..., None]
        if self.kind is Kind.NORMAL:
            out = self.const - 0.5 * np.sum(self.prec * (t - th) ** 2, axis=-1)
        else:
            ncp = self.ncpf * th
            tt = t * t
            z = 0.5 * ncp * ncp * tt / (self.df + tt)
            if np.all(z <= SERIES_Z_MAX):
                ld = (self.log_norm - self.half_df1 * np.log1p(tt / self.df) - 0.5 * ncp * ncp
                      + log_kummer_half(z, self.half_df1))
            else:
                ld = folded_t_log_pdf_arrays(t, self.df, ncp)
            out = np.sum(self.w * ld, axis=-1)
        return out if out.ndim else float(out)

    def closed_form(self, t=None) -> float:
        t = self.t if t is None else t
        return float(np.sum(self.prec * t) / np.sum(self.prec))


def _brent_max(F, a, b, x, fx, xtol, max_iter):
    """Bounded Brent maximization of ``F`` on ``[a, b]`` started at ``x``.

    Golden-section steps with parabolic interpolation when it is safe.
    Returns ``(x, F(x), evaluations)`` for the best point seen.
    """
    w = v = x
    fw = fv = fx
    d = e = 0.0
    evals = 0
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        tol1 = 1e-12 * abs(x) + xtol / 3.0
        tol2 = 2.0 * tol1
        if abs(x - mid) <= tol2 - 0.5 * (b - a):
            break
        use_golden = True
        if abs(e) > tol1:
            # parabola through (x, fx), (w, fw), (v, fv); values are negated for a minimizer
            r = (x - w) * (fv - fx)
            q = (x - v) * (fw - fx)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            e_prev, e = e, d
            if abs(p) < abs(0.5 * q * e_prev) and q * (a - x) < p < q * (b - x):
                d = p / q
                u = x + d
                if u - a < tol2 or b - u < tol2:
                    d = tol1 if x < mid else -tol1
                use_golden = False
        if use_golden:
            e = (b - x) if x < mid else (a - x)
            d = GOLDEN * e
        u = x + (d if abs(d) >= tol1 else math.copysign(tol1, d))
        fu = F(u)
        evals += 1
        if fu >= fx:
            if u >= x:
                a = x
            else:
                b = x
            v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu >= fw or w == x:
                v, fv, w, fw = w, fw, u, fu
            elif fu >= fv or v == x or v == w:
                v, fv = u, fu
    return x, fx, evals


def maximize(F, lo, hi, start, step, optim: OptimConfig):
    """Maximize a smooth 1-d objective on ``[lo, hi]`` (bounds may be infinite).

    ``F`` must accept a 1-d array.  A grid of ``optim.grid_points`` is laid
    over a bracket around ``start``; the bracket is pushed outward while the
    best grid point sits on an open edge.  Brent's method then polishes the
    best grid cell.  Ties go to the smallest maximizer.
    Returns ``(theta, value, evaluations)``.
    """
    x0 = min(max(start, lo), hi)
    step = max(step, 1e-8)
    a, b = max(lo, x0 - step), min(hi, x0 + step)
    G = optim.grid_points
    evals = 0
    # an edge we moved away from already lies below an interior point
    left_closed = right_closed = False
    for _ in range(optim.max_expansions):
        grid = np.linspace(a, b, G)
        vals = np.asarray(F(grid))
        evals += G
        vals = np.where(np.isnan(vals), -np.inf, vals)
        k = int(np.argmax(vals))
        if not np.isfinite(vals[k]):
            raise OptimizerFailure("objective is not finite anywhere on the bracket")
        if k == 0 and a > lo and not left_closed:
            width = b - a
            a, b = max(lo, a - 2.0 * width), grid[1]
            right_closed, left_closed = True, False
            continue
        if k == G - 1 and b < hi and not right_closed:
            width = b - a
            a, b = grid[-2], min(hi, b + 2.0 * width)
            left_closed, right_closed = True, False
            continue
        break
    else:
        raise OptimizerFailure(f"no bracketed maximum after {optim.max_expansions} expansions")

    ca, cb = grid[max(k - 1, 0)], grid[min(k + 1, G - 1)]
    x, fx = float(grid[k]), float(vals[k])

    def f1(u):
        return float(F(np.array([u]))[0])

    x, fx, n = _brent_max(f1, ca, cb, x, fx, optim.theta_tol, optim.max_iter)
    evals += n
    # Function values alone pin a maximum only to ~sqrt(eps); one vertex step
    # from a wide symmetric stencil uses curvature and gets well below that.
    h = max(1e-4 * step, 1e3 * optim.theta_tol)
    if lo <= x - h and x + h <= hi:
        fm, fp = f1(x - h), f1(x + h)
        evals += 2
        curv = fp - 2.0 * fx + fm
        if curv < 0.0:
            u = x - 0.5 * h * (fp - fm) / curv
            if abs(u - x) <= h:
                fu = f1(u)
                evals += 1
                if fu >= fx - 1e-12 * (1.0 + abs(fx)):
                    x, fx = u, fu
    for bound in (lo, hi):
        if math.isfinite(bound) and abs(x - bound) <= optim.theta_tol:
            fb = f1(bound)
            evals += 1
            if fb >= fx:
                x, fx = bound, fb
    return x, fx, evals


def _moment_start(terms: Terms, t=None) -> float:
    t = terms.t if t is None else t
    if terms.kind is Kind.NORMAL:
        return terms.closed_form(t)
    # statistic mapped back through the noncentrality
    return float(np.sum(terms.w * t / terms.ncpf) / np.sum(terms.w))


def weighted_log_likelihood(theta, row: WeightRow, obs: ComparisonSet):
    """``sum_j w_ij log g_theta(t_j)`` plus the pseudo term when present.

    Zero-weight terms are dropped before evaluation, so they contribute
    exactly zero even where their log-density is ``-inf``.
    """
    terms = Terms(row, obs)
    lo, hi = terms.focus_family.theta_bounds
    th = np.asarray(theta, dtype=float)
    if np.any(th < lo) or np.any(th > hi) or np.any(np.isnan(th)):
        raise InvalidParameter(f"theta outside {terms.focus_family.theta_bounds}")
    return terms.loglik(th)


def weighted_mle_normal_closed_form(row: WeightRow, obs: ComparisonSet) -> float:
    """``sum_j w_j t_j / sigma_j**2`` over ``sum_j w_j / sigma_j**2`` (pseudo term included)."""
    if obs.kind is not Kind.NORMAL:
        raise WrongFamily("closed-form weighted MLE needs normal families")
    return Terms(row, obs).closed_form()


def _mle_terms(terms: Terms, lo, hi, optim, t=None, start=None, step=None):
    if lo == hi:
        return lo, float(terms.loglik(lo, t)), 0
    if terms.kind is Kind.NORMAL and optim.method == "auto":
        th = min(max(terms.closed_form(t), lo), hi)
        return th, float(terms.loglik(th, t)), 0
    if start is None:
        start = _moment_start(terms, t)
    if step is None:
        step = terms.focus_family.theta_scale_hint()
    return maximize(lambda th: terms.loglik(th, t), lo, hi, start, step, optim)


def weighted_mle(space: ParameterSpace, row: WeightRow, obs: ComparisonSet,
                 optim: OptimConfig | None = None, start: float | None = None) -> WeightedMleResult:
    """Maximum weighted likelihood estimate over the closure of ``space``."""
    optim = optim or OptimConfig()
    terms = Terms(row, obs)
    lo, hi = space.closure_bounds(terms.focus_family)
    theta, value, iters = _mle_terms(terms, lo, hi, optim, start=start)
    tol = optim.theta_tol
    at_boundary = ((math.isfinite(lo) and abs(theta - lo) <= tol)
                   or (math.isfinite(hi) and abs(theta - hi) <= tol))
    if space.kind is SpaceKind.PUNCTURED and abs(theta - space.point) <= tol:
        at_boundary = True
    if space.kind is SpaceKind.SINGLETON:
        at_boundary = False
    return WeightedMleResult(float(theta), float(value), bool(at_boundary), int(iters))
