"""Parametric complexity and normalized maximum weighted likelihood densities.

For focus comparison ``i`` the profile

    P_i(t) = max_theta  sum_j w_ij log g_theta(t_j),   with t_i replaced by t,

is integrated over the focus support; its log integral is the parametric
complexity, and the NMWL log-density of the observed ``t_i`` is
``P_i(t_i)`` minus that complexity.  The approximate variant replaces the
per-comparison denominator by one shared integral in which the incidental
weight is spread evenly over all ``N`` observed statistics and a free
``N+1``-th statistic carries the focus weight.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EqualWeightViolation,
    InvalidParameter,
    NMWLError,
    OutOfSupport,
)
from .families import Kind, ReducedObservation
from .quadrature import QuadratureConfig, log_integrate
from .weights import WeightRow
from .wlik import ComparisonSet, OptimConfig, ParameterSpace, SpaceKind, Terms, _mle_terms

WINDOW_SDS = 6.0


class Mode(enum.Enum):
    EXACT = "exact"
    APPROXIMATE = "approximate"


@dataclass(frozen=True)
class ComplexityResult:
    log_complexity: float
    mode: Mode
    quadrature_error_estimate: float  # relative, quadrature plus truncated tail
    nodes_used: int


class _Profile:
    """Vectorized ``t -> P_i(t)`` for one focus comparison."""

    def __init__(self, space: ParameterSpace, row: WeightRow, obs: ComparisonSet,
                 optim: OptimConfig):
        self.terms = Terms(row, obs)
        self.family = self.terms.focus_family
        self.lo, self.hi = space.closure_bounds(self.family)
        self.optim = optim
        self.last_theta = None

    def _matrix(self, ts):
        T = np.repeat(self.terms.t[None, :], len(ts), axis=0)
        T[:, self.terms.focus] = ts
        return T

    def at(self, t, start=None, step=None):
        """Profile value and maximizer at a single ``t``."""
        tt = self.terms.with_focus(t)
        theta, value, _ = _mle_terms(self.terms, self.lo, self.hi, self.optim, tt, start, step)
        return value, theta

    def __call__(self, ts):
        ts = np.asarray(ts, dtype=float)
        terms = self.terms
        if self.lo == self.hi:
            return np.asarray(terms.loglik(self.lo, self._matrix(ts)), dtype=float)
        if terms.kind is Kind.NORMAL and self.optim.method == "auto":
            f = terms.focus
            P = terms.prec.sum()
            rest = terms.prec @ terms.t - terms.prec[f] * terms.t[f]
            theta = np.clip((rest + terms.prec[f] * ts) / P, self.lo, self.hi)
            return np.asarray(terms.loglik(theta, self._matrix(ts)), dtype=float)
        # generic path: sequential maximization warm-started along sorted t
        out = np.empty(ts.shape)
        order = np.argsort(ts)
        prev = self.last_theta
        step = 0.05 * self.family.theta_scale_hint()
        for k in order:
            value, theta = self.at(ts[k], start=prev, step=None if prev is None else step)
            out[k] = value
            prev = theta
        self.last_theta = prev
        return out


def _check_focus(i, row: WeightRow, obs: ComparisonSet):
    if row.focus_index != i:
        raise DimensionMismatch(f"weight row is focused on {row.focus_index}, not {i}")
    if len(row.weights) != len(obs):
        raise DimensionMismatch(f"weight row has {len(row.weights)} entries, comparison set {len(obs)}")


def _check_support(family, t):
    lo, hi = family.support
    if not (lo <= t <= hi) or math.isnan(t):
        raise OutOfSupport(f"t={t} outside support {family.support}")


def profile_log_wlik(i: int, t: float, space: ParameterSpace, row: WeightRow, obs: ComparisonSet,
                     optim: OptimConfig | None = None) -> float:
    """Maximized weighted log-likelihood with ``t`` substituted for ``t_i``."""
    _check_focus(i, row, obs)
    _check_support(obs.family(i), t)
    value, _ = _Profile(space, row, obs, optim or OptimConfig()).at(float(t))
    return float(value)


def _window(profile: _Profile, t_obs: float):
    """Initial integration window from the focus family under the observed fit."""
    _, theta = profile.at(t_obs)
    fam = profile.family
    w = max(profile.terms.w[profile.terms.focus], 1e-12)
    if fam.kind is Kind.NORMAL:
        return theta, WINDOW_SDS * fam.scale / math.sqrt(w)
    ncp = fam.ncp_factor * abs(theta)
    spread = math.sqrt(1.0 + ncp ** 2 / (2.0 * fam.df)) / math.sqrt(w)
    return ncp, WINDOW_SDS * spread


def _integrate_profile(space, row, obs, q, optim, mode) -> ComplexityResult:
    profile = _Profile(space, row, obs, optim)
    t_obs = float(profile.terms.t[profile.terms.focus])
    center, half = _window(profile, t_obs)
    log_c, err, nodes = log_integrate(profile, profile.family.support, center, half, q)
    return ComplexityResult(float(log_c), mode, float(err), int(nodes))


def parametric_complexity_exact(i: int, space: ParameterSpace, row: WeightRow, obs: ComparisonSet,
                                q: QuadratureConfig | None = None,
                                optim: OptimConfig | None = None) -> ComplexityResult:
    """``log int exp(P_i(t)) dt`` over the focus support.

    Raises :class:`DivergentComplexity` when the integral does not converge,
    as for the unweighted likelihood of a location family over the line.
    """
    _check_focus(i, row, obs)
    return _integrate_profile(space, row, obs, q or QuadratureConfig(), optim or OptimConfig(),
                              Mode.EXACT)


def check_equal_weight_conditions(obs: ComparisonSet, row: WeightRow | None = None):
    """Raise :class:`EqualWeightViolation` unless the shared denominator applies.

    All comparisons need the same family instance and sample size; a given
    row must spread its incidental weight evenly.
    """
    fam0, n0 = obs.family(0), obs[0].sample_size
    for j, o in enumerate(obs.observations):
        if o.family != fam0:
            raise EqualWeightViolation(f"comparison {o.id or j} has family {o.family}, expected {fam0}")
        if o.sample_size != n0:
            raise EqualWeightViolation(f"comparison {o.id or j} has n={o.sample_size}, expected {n0}")
    if row is not None:
        off = [w for j, w in enumerate(row.weights) if j != row.focus_index]
        if off and max(off) - min(off) > 1e-12:
            raise EqualWeightViolation("incidental weights are not all equal")


def shared_configuration(obs: ComparisonSet, w11: float, pseudo_weight=None, pseudo_statistic=None,
                         focus: int = 0):
    """Extended comparison set and weight row whose exact complexity is the shared one.

    The observed statistics get ``(1 - w11 - w0)/N`` each, an appended free
    statistic gets ``w11`` and the pseudo term (if any) keeps ``w0``.  The
    free statistic takes the family of comparison ``focus``; under the
    equal-weight conditions every choice gives the same integral.
    """
    N = len(obs)
    w0 = pseudo_weight or 0.0
    spread = (1.0 - w11 - w0) / N
    if not (0.0 < w11 <= 1.0) or spread < -1e-15:
        raise InvalidParameter(f"focus weight {w11} and pseudo weight {w0} leave no valid spread")
    spread = max(spread, 0.0)
    src = obs[focus]
    free = ReducedObservation(src.statistic, src.family, src.sample_size, "~")
    ext = ComparisonSet(obs.observations + (free,))
    row = WeightRow(N, tuple([spread] * N + [w11]), pseudo_weight, pseudo_statistic, scheme="shared")
    return ext, row


def parametric_complexity_approx(space: ParameterSpace, obs: ComparisonSet, w11: float,
                                 N: int | None = None, q: QuadratureConfig | None = None,
                                 optim: OptimConfig | None = None, pseudo_weight=None,
                                 pseudo_statistic=None) -> ComplexityResult:
    """One log-denominator shared by every comparison of ``obs``."""
    if N is not None and N != len(obs):
        raise DimensionMismatch(f"N={N} but the comparison set has {len(obs)} entries")
    check_equal_weight_conditions(obs)
    return append_complexity(0, space, obs, w11, q, optim, pseudo_weight, pseudo_statistic)


def append_complexity(i: int, space: ParameterSpace, obs: ComparisonSet, w11: float,
                      q: QuadratureConfig | None = None, optim: OptimConfig | None = None,
                      pseudo_weight=None, pseudo_statistic=None) -> ComplexityResult:
    """Append-construction denominator with comparison ``i``'s family on the free statistic.

    No equal-weight gate: with heterogeneous families this is a per-focus
    stand-in for the shared denominator, used only where a caller has
    explicitly accepted that the equal-weight conditions fail.
    """
    ext, row = shared_configuration(obs, w11, pseudo_weight, pseudo_statistic, focus=i)
    return _integrate_profile(space, row, ext, q or QuadratureConfig(), optim or OptimConfig(),
                              Mode.APPROXIMATE)


class ComplexityCache:
    """Memo of complexity results keyed by the content of the integral.

    A key holds the focus family and weight, the pseudo term, and every
    other nonzero-weight term as ``(statistic, family, weight)``.  The focus
    statistic is left out because it is integrated out, so all comparisons
    sharing a denominator share one entry.  A stored exception is raised
    again on lookup.
    """

    def __init__(self):
        self._store = {}
        self.hits = 0
        self.misses = 0

    def get(self, key, compute):
        if key in self._store:
            self.hits += 1
            value = self._store[key]
        else:
            self.misses += 1
            try:
                value = compute()
            except NMWLError as exc:
                value = exc
            self._store[key] = value
        if isinstance(value, Exception):
            raise value
        return value

    def put(self, key, value):
        self._store[key] = value

    def __contains__(self, key):
        return key in self._store

    def __len__(self):
        return len(self._store)


def _route(i, row: WeightRow, obs: ComparisonSet, mode: Mode, relaxed: bool) -> str:
    if mode is Mode.EXACT:
        return "exact"
    incidental = any(w != 0.0 for j, w in enumerate(row.weights) if j != i)
    if not incidental:
        return "exact"
    try:
        check_equal_weight_conditions(obs, row)
    except EqualWeightViolation:
        if not relaxed:
            raise
        return "append"
    return "shared"


def canonical_focus(i, row: WeightRow, obs: ComparisonSet) -> ComparisonSet:
    """``obs`` with ``t_i`` replaced by a value fixed by the other terms.

    The exact complexity does not depend on ``t_i``, but the integration
    window is placed from it; pinning it to the weighted mean of the other
    terms makes the computed value a function of the cache key alone.
    """
    w = [(row.weights[j], obs[j].statistic) for j in range(len(obs)) if j != i and row.weights[j] != 0.0]
    if row.has_pseudo and row.pseudo_weight != 0.0:
        w.append((row.pseudo_weight, row.pseudo_statistic))
    if w:
        t = sum(a * b for a, b in w) / sum(a for a, _ in w)
    else:
        t = 0.0 if obs.kind is Kind.NORMAL else 1.0
    return obs.substitute(i, t)


def complexity_key(i, space: ParameterSpace, row: WeightRow, obs: ComparisonSet,
                   mode: Mode = Mode.EXACT, q: QuadratureConfig | None = None,
                   optim: OptimConfig | None = None, relaxed: bool = False):
    """Cache key of the complexity :func:`log_complexity` would compute."""
    mode = Mode(mode)
    route = _route(i, row, obs, mode, relaxed)
    pseudo = (row.pseudo_weight, row.pseudo_statistic)
    if route == "exact":
        others = tuple((obs[j].statistic, obs.family(j), w)
                       for j, w in enumerate(row.weights) if j != i and w != 0.0)
        content = (obs.family(i), row.focus_weight, pseudo, others)
    else:
        spread = tuple((o.statistic, o.family) for o in obs.observations)
        fam = obs.family(0) if route == "shared" else obs.family(i)
        content = (fam, row.focus_weight, pseudo, spread)
    return (route, space.key(), content, q or QuadratureConfig(), optim or OptimConfig())


def log_complexity(i: int, space: ParameterSpace, row: WeightRow, obs: ComparisonSet,
                   mode: Mode = Mode.EXACT, q: QuadratureConfig | None = None,
                   optim: OptimConfig | None = None, cache: ComplexityCache | None = None,
                   relaxed: bool = False) -> ComplexityResult:
    """Exact or approximate complexity for focus ``i``, through ``cache`` if given.

    Approximate mode needs the equal-weight conditions; with ``relaxed``
    a violation falls back to :func:`append_complexity` for this focus
    instead of raising.  When the row has no incidental weight at all (a
    pure pseudo-statistic row) the exact denominator already ignores the
    other comparisons, and both modes coincide.
    """
    mode = Mode(mode)
    q = q or QuadratureConfig()
    optim = optim or OptimConfig()
    _check_focus(i, row, obs)
    route = _route(i, row, obs, mode, relaxed)

    def compute():
        if route == "shared":
            return parametric_complexity_approx(space, obs, row.focus_weight, len(obs), q, optim,
                                                row.pseudo_weight, row.pseudo_statistic)
        if route == "append":
            return append_complexity(i, space, obs, row.focus_weight, q, optim,
                                     row.pseudo_weight, row.pseudo_statistic)
        res = parametric_complexity_exact(i, space, row, canonical_focus(i, row, obs), q, optim)
        return res if mode is Mode.EXACT else ComplexityResult(
            res.log_complexity, mode, res.quadrature_error_estimate, res.nodes_used)

    if cache is None:
        return compute()
    res = cache.get(complexity_key(i, space, row, obs, mode, q, optim, relaxed), compute)
    if res.mode is not mode:
        # exact and approximate coincide for pseudo-only rows and share an entry
        res = ComplexityResult(res.log_complexity, mode, res.quadrature_error_estimate, res.nodes_used)
    return res


def nmwl_log_density(i: int, space: ParameterSpace, row: WeightRow, obs: ComparisonSet,
                     mode: Mode = Mode.EXACT, q: QuadratureConfig | None = None,
                     optim: OptimConfig | None = None, cache: ComplexityCache | None = None,
                     relaxed: bool = False) -> float:
    """``P_i(t_i)`` minus the exact or approximate log-complexity."""
    optim = optim or OptimConfig()
    num = profile_log_wlik(i, obs[i].statistic, space, row, obs, optim)
    return num - log_complexity(i, space, row, obs, mode, q, optim, cache, relaxed).log_complexity


def asymptotic_complexity_normal(space: ParameterSpace, n_i: int, sigma: float) -> float:
    """Large-sample complexity ``1/2 log(n/2pi) + log((hi - lo)/sigma)``.

    Uses the per-observation Fisher information ``1/sigma**2`` of a normal
    mean on a bounded interval.  Diagnostic only.
    """
    if space.kind is not SpaceKind.BOUNDED:
        raise InvalidParameter("the asymptotic complexity needs a bounded interval")
    if n_i < 1 or not sigma > 0:
        raise InvalidParameter("n_i must be >= 1 and sigma > 0")
    fisher = 1.0 / sigma ** 2
    return 0.5 * math.log(n_i / (2.0 * math.pi)) + math.log((space.hi - space.lo) * math.sqrt(fisher))
