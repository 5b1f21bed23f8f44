"""Discrimination information between two hypothesis spaces, graded in bits.

The information in ``t_i`` for discriminating ``Theta_1`` from ``Theta_0``
is the log ratio of the two NMWL densities,

    DI_i = [P_i(t_i; Theta_1) - C_i(Theta_1)] - [P_i(t_i; Theta_0) - C_i(Theta_0)],

reported in bits.  Grades follow the usual heuristic bins of evidence
strength; a negative value grades evidence for the null.
"""

from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize

from .complexity import (
    ComplexityCache,
    ComplexityResult,
    Mode,
    QuadratureConfig,
    complexity_key,
    log_complexity,
    profile_log_wlik,
)
from .errors import DegenerateFit, DivergentComplexity, InvalidParameter, NMWLError, WrongFamily
from .families import log_density, null_pseudo_statistic
from .weights import (
    WeightRow,
    blended_weights,
    null_pseudo_weights,
    require_valid,
    single_observation_weights,
)
from .wlik import ComparisonSet, OptimConfig, ParameterSpace

LN2 = math.log(2.0)


class Grade(enum.Enum):
    NEGLIGIBLE = "Negligible"
    WEAK = "Weak"
    MODERATE = "Moderate"
    STRONG = "Strong"
    VERY_STRONG = "VeryStrong"
    OVERWHELMING = "Overwhelming"


class Favors(enum.Enum):
    ALTERNATIVE = "Alternative"
    NULL = "Null"


# lower edges of the bins, in bits
GRADE_EDGES = ((7.0, Grade.OVERWHELMING), (5.0, Grade.VERY_STRONG), (3.0, Grade.STRONG),
               (2.0, Grade.MODERATE), (1.0, Grade.WEAK), (0.0, Grade.NEGLIGIBLE))


def grade(di_bits: float) -> tuple[Grade, Favors]:
    """Evidence grade of ``|di_bits|`` and the side it favors (0 favors the alternative)."""
    if not math.isfinite(di_bits):
        raise InvalidParameter(f"cannot grade non-finite information {di_bits}")
    mag = abs(di_bits)
    g = next(label for edge, label in GRADE_EDGES if mag >= edge)
    return g, (Favors.NULL if di_bits < 0 else Favors.ALTERNATIVE)


@dataclass(frozen=True)
class EvidenceReport:
    id: str
    di_bits: float
    grade: Grade
    favors: Favors
    regret_bits: float  # regret of the alternative NMWL at t_i, i.e. its complexity in bits
    log_numerator_alt: float
    log_numerator_null: float
    log_complexity_alt: float
    log_complexity_null: float
    mode: Mode
    weight_scheme: str
    equal_weight_conditions: bool = True

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grade"] = self.grade.value
        d["favors"] = self.favors.value
        d["mode"] = self.mode.value
        return d


def _side_complexity(side, i, space, row, obs, mode, q, optim, cache, relaxed) -> ComplexityResult:
    try:
        return log_complexity(i, space, row, obs, mode, q, optim, cache, relaxed)
    except DivergentComplexity as exc:
        raise DivergentComplexity(str(exc), side=side) from exc


def discrimination_information(i: int, theta1: ParameterSpace, theta0: ParameterSpace,
                               row: WeightRow, obs: ComparisonSet, mode: Mode = Mode.EXACT,
                               q: QuadratureConfig | None = None, optim: OptimConfig | None = None,
                               cache: ComplexityCache | None = None,
                               relaxed: bool = False) -> EvidenceReport:
    """Information in ``t_i`` favoring ``theta1`` over ``theta0``, in bits.

    A divergent denominator on either side raises
    :class:`DivergentComplexity` with ``side`` set to ``"alternative"`` or
    ``"null"``.  ``relaxed`` lets approximate mode run without the
    equal-weight conditions (see :func:`nmwl.complexity.log_complexity`).
    """
    mode = Mode(mode)
    optim = optim or OptimConfig()
    q = q or QuadratureConfig()
    t_i = obs[i].statistic
    num1 = profile_log_wlik(i, t_i, theta1, row, obs, optim)
    num0 = profile_log_wlik(i, t_i, theta0, row, obs, optim)
    c1 = _side_complexity("alternative", i, theta1, row, obs, mode, q, optim, cache, relaxed)
    c0 = _side_complexity("null", i, theta0, row, obs, mode, q, optim, cache, relaxed)
    di = ((num1 - c1.log_complexity) - (num0 - c0.log_complexity)) / LN2
    g, fav = grade(di)
    equal = True
    if mode is Mode.APPROXIMATE and relaxed:
        key = complexity_key(i, theta1, row, obs, mode, q, optim, relaxed)
        equal = key[0] != "append"
    return EvidenceReport(obs[i].id, float(di), g, fav, c1.log_complexity / LN2, num1, num0,
                          c1.log_complexity, c0.log_complexity, mode, row.scheme, equal)


def generalized_regret(i: int, t: float, space: ParameterSpace, predictive_log_density_at_t: float,
                       row: WeightRow, obs: ComparisonSet,
                       optim: OptimConfig | None = None) -> float:
    """Regret in bits of a predictive density at ``t`` against the maximized weighted likelihood."""
    return (profile_log_wlik(i, t, space, row, obs, optim) - predictive_log_density_at_t) / LN2


# ---------------------------------------------------------------------------
# weight schemes over a whole comparison set

SCHEMES = ("sites", "null", "blended")


def scheme_rows(obs: ComparisonSet, scheme: str, null_point: float = 0.0) -> list[WeightRow]:
    """One weight row per comparison for a named scheme.

    ``sites`` spreads one observation's weight over the other comparisons;
    ``null`` gives it to the null expectation of the statistic; ``blended``
    shares it between both.
    """
    N = len(obs)
    rows = []
    for i, o in enumerate(obs.observations):
        if scheme == "sites":
            rows.append(single_observation_weights(i, o.sample_size, N))
            continue
        t0 = null_pseudo_statistic(o.family, null_point)
        if scheme == "null":
            rows.append(null_pseudo_weights(o.sample_size, t0, N, i))
        elif scheme == "blended":
            rows.append(blended_weights(i, o.sample_size, N, t0))
        else:
            raise InvalidParameter(f"unknown weight scheme {scheme!r}")
    return rows


def hypothesis_spaces(obs: ComparisonSet, null_point: float = 0.0, alternative: str = "two-sided"):
    """``(Theta_1, Theta_0)`` for a point null and a two-sided or nonnegative alternative.

    Folded-t families have ``theta >= 0``, so either alternative becomes
    the half line for them.
    """
    theta0 = ParameterSpace.singleton(null_point)
    lo, _ = obs.family(0).theta_bounds
    if alternative == "nonneg" or lo >= 0:
        if null_point != 0.0 and alternative == "nonneg":
            raise InvalidParameter("the nonnegative alternative needs a null point at 0")
        theta1 = ParameterSpace.half_line()
    elif alternative == "two-sided":
        theta1 = ParameterSpace.punctured(null_point)
    else:
        raise InvalidParameter(f"unknown alternative {alternative!r}")
    return theta1, theta0


def _compute_job(job):
    i, space, row, obs, mode, q, optim, relaxed = job
    try:
        return log_complexity(i, space, row, obs, mode, q, optim, None, relaxed)
    except NMWLError as exc:
        return exc


def fill_cache(jobs, cache: ComplexityCache, workers: int = 1):
    """Compute the distinct complexities among ``jobs`` into ``cache``.

    Each job is ``(i, space, row, obs, mode, q, optim, relaxed)``.  Results
    (or the errors raised) are stored in job order, so the filled cache is
    the same for any worker count.
    """
    unique = {}
    for job in jobs:
        key = complexity_key(*job[:7], relaxed=job[7])
        if key not in cache and key not in unique:
            unique[key] = job
    keys = list(unique)
    todo = [unique[k] for k in keys]
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_compute_job, todo))
    else:
        results = [_compute_job(j) for j in todo]
    for key, res in zip(keys, results):
        cache.put(key, res)


def analyze(obs: ComparisonSet, scheme: str = "sites", modes=(Mode.EXACT, Mode.APPROXIMATE),
            null_point: float = 0.0, alternative: str = "two-sided",
            rows: list[WeightRow] | None = None, q: QuadratureConfig | None = None,
            optim: OptimConfig | None = None, workers: int = 1,
            cache: ComplexityCache | None = None) -> dict[Mode, list[EvidenceReport]]:
    """Evidence reports for every comparison under one weight scheme.

    ``rows`` supplies custom weight rows (``scheme`` is then only a label).
    Approximate mode is run relaxed: when the equal-weight conditions fail
    the per-focus append denominator is used and the report says so.
    Raises the first :class:`NMWLError` met, with ``comparison_id`` set.
    """
    q = q or QuadratureConfig()
    optim = optim or OptimConfig()
    cache = cache if cache is not None else ComplexityCache()
    modes = [Mode(m) for m in modes]
    if rows is None:
        rows = scheme_rows(obs, scheme, null_point)
    else:
        rows = [require_valid(r) for r in rows]
        if [r.focus_index for r in rows] != list(range(len(obs))):
            raise InvalidParameter("custom rows must be given in comparison order")
    theta1, theta0 = hypothesis_spaces(obs, null_point, alternative)
    jobs = [(i, space, rows[i], obs, mode, q, optim, True)
            for mode in modes for i in range(len(obs)) for space in (theta1, theta0)]
    fill_cache(jobs, cache, workers)
    out = {}
    for mode in modes:
        reports = []
        for i in range(len(obs)):
            try:
                reports.append(discrimination_information(i, theta1, theta0, rows[i], obs, mode,
                                                          q, optim, cache, relaxed=True))
            except NMWLError as exc:
                exc.comparison_id = obs[i].id
                raise
        out[mode] = reports
    return out


# ---------------------------------------------------------------------------
# MLE baseline: common alternative fitted by a two-point mixture

@dataclass(frozen=True)
class MleBaseline:
    theta_alt: float
    p: float
    log_likelihood: float
    degenerate: bool
    log2_ratios: np.ndarray  # log2 g(theta_alt; t_i) / g(0; t_i) per comparison

    def log_density(self, obs: ComparisonSet, i: int, t) -> float:
        """Log density of the fitted alternative for comparison ``i`` at ``t``."""
        return log_density(obs.family(i), self.theta_alt, t)


def _best_p(log_r):
    """Maximize ``sum log(1 + p (r_i - 1))`` over ``p`` in [0, 1]; returns ``(p, value)``."""
    log_r = np.clip(log_r, -700.0, 700.0)
    r = np.exp(log_r)

    def value(p):
        return float(np.sum(np.log1p(p * (r - 1.0))))

    def slope(p):
        with np.errstate(divide="ignore"):
            return float(np.sum((r - 1.0) / (1.0 + p * (r - 1.0))))

    if slope(0.0) <= 0.0:
        return 0.0, 0.0
    if slope(1.0) >= 0.0:
        return 1.0, float(np.sum(log_r))
    p = optimize.brentq(slope, 0.0, 1.0, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    return p, value(p)


def _mixture_profile(obs, theta_alt, log_g0):
    log_g1 = np.array([log_density(o.family, theta_alt, o.statistic) for o in obs.observations])
    p, v = _best_p(log_g1 - log_g0)
    return p, v + float(np.sum(log_g0)), log_g1


def mixture_log_likelihood(obs: ComparisonSet, p: float, theta_alt: float) -> float:
    """``sum_i log[p g(theta_alt; t_i) + (1 - p) g(0; t_i)]``."""
    ll = 0.0
    for o in obs.observations:
        a = log_density(o.family, theta_alt, o.statistic)
        b = log_density(o.family, 0.0, o.statistic)
        ll += float(np.logaddexp(math.log(p) + a if p > 0 else -np.inf,
                                 math.log1p(-p) + b if p < 1 else -np.inf))
    return ll


def mle_baseline(obs: ComparisonSet, space_alt: ParameterSpace | None = None,
                 grid_size: int = 64) -> MleBaseline:
    """Fit ``(p, theta_alt)`` of a two-point mixture at 0 and ``theta_alt > 0``.

    ``theta_alt`` is profiled over ``grid_size`` log-spaced values spanning
    four decades of the families' parameter scale, with ``p`` maximized in
    closed 1-d form at each, then refined between the best point's
    neighbors.  A fit at ``p`` of 0 or 1 is flagged ``degenerate`` and a
    :class:`DegenerateFit` warning is issued.
    """
    space_alt = space_alt or ParameterSpace.half_line()
    if space_alt.kind.value != "half-line":
        raise InvalidParameter("the MLE baseline needs the nonnegative half line as alternative")
    kinds = {o.family.kind for o in obs.observations}
    if len(kinds) != 1:
        raise WrongFamily("the MLE baseline needs one common family kind")
    scale = float(np.median([o.family.theta_scale_hint() for o in obs.observations]))
    log_grid = np.linspace(math.log(1e-2 * scale), math.log(1e2 * scale), grid_size)
    log_g0 = np.array([log_density(o.family, 0.0, o.statistic) for o in obs.observations])
    values = np.array([_mixture_profile(obs, math.exp(u), log_g0)[1] for u in log_grid])
    k = int(np.argmax(values))
    lo, hi = log_grid[max(k - 1, 0)], log_grid[min(k + 1, grid_size - 1)]
    best_u, best_v = log_grid[k], values[k]
    if hi > lo:
        res = optimize.minimize_scalar(lambda u: -_mixture_profile(obs, math.exp(u), log_g0)[1],
                                       bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-10})
        if -res.fun > best_v:
            best_u, best_v = float(res.x), -float(res.fun)
    theta_alt = math.exp(best_u)
    p, ll, log_g1 = _mixture_profile(obs, theta_alt, log_g0)
    degenerate = p <= 1e-9 or p >= 1.0 - 1e-9
    if degenerate:
        warnings.warn(DegenerateFit(f"mixture fit landed on p={p:g}; theta_alt is poorly determined"),
                      stacklevel=2)
    return MleBaseline(theta_alt, float(p), float(ll), bool(degenerate), (log_g1 - log_g0) / LN2)
