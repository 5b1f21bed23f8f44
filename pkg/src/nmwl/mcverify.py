"""Monte Carlo checks of the probabilistic guarantees.

Every replicate draws from its own stream, ``SeedSequence(seed,
spawn_key=(r,))``, so results do not depend on how replicates are split
across worker processes; blocks are always reassembled in replicate order.
Finite-replicate checks give trend evidence for almost-sure limits, not
proofs.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .complexity import (
    ComplexityCache,
    Mode,
    QuadratureConfig,
    asymptotic_complexity_normal,
    log_complexity,
    parametric_complexity_exact,
    profile_log_wlik,
)
from .errors import ConfigError
from .evidence import LN2, discrimination_information, scheme_rows
from .families import FamilyInstance, Kind, sample_statistic
from .weights import WeightRow, single_observation_weights
from .wlik import ComparisonSet, OptimConfig, ParameterSpace, weighted_mle

TREND_NOTE = "finite-replicate trend evidence for an almost-sure limit, not a proof"


@dataclass(frozen=True)
class SimulationConfig:
    family: FamilyInstance
    theta_true: float
    N: int
    replicates: int
    seed: int
    weight_scheme: str = "sites"
    thresholds: tuple[float, ...] = (10.0, 100.0)
    mode: str = "exact"
    sample_size: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(k) for k in self.thresholds))
        if self.replicates < 100:
            raise ConfigError(f"replicates must be >= 100, got {self.replicates}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.N < 1:
            raise ConfigError("N must be >= 1")
        if self.weight_scheme not in ("sites", "null", "blended"):
            raise ConfigError(f"unknown weight scheme {self.weight_scheme!r}")
        if self.weight_scheme == "sites" and self.N < 2:
            raise ConfigError("the sites scheme needs N >= 2")
        if not self.thresholds or any(not k >= 1.0 for k in self.thresholds):
            raise ConfigError("thresholds must be >= 1")
        Mode(self.mode)

    def describe(self) -> dict:
        fam = self.family
        d = {"family": fam.kind.value, "theta_true": self.theta_true, "N": self.N,
             "replicates": self.replicates, "seed": self.seed, "weight_scheme": self.weight_scheme,
             "thresholds": list(self.thresholds), "mode": self.mode}
        if fam.kind is Kind.NORMAL:
            d["sigma"] = fam.scale
        else:
            d["m"], d["n"] = fam.group_sizes
        if self.sample_size is not None:
            d["sample_size"] = self.sample_size
        return d


@dataclass
class VerificationReport:
    check: str
    config: dict
    thresholds: list = field(default_factory=list)
    complexity_gaps: list = field(default_factory=list)
    trend: list = field(default_factory=list)
    passed: bool = True
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"check": self.check, "config": self.config, "thresholds": self.thresholds,
                "complexity_gaps": self.complexity_gaps, "trend": self.trend,
                "passed": self.passed, "notes": self.notes}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def binomial_se(rate: float, replicates: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / replicates)


def replicate_rng(seed: int, r: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(r,)))


def _replicate_obs(cfg: SimulationConfig, r: int) -> ComparisonSet:
    rng = replicate_rng(cfg.seed, r)
    t = np.atleast_1d(sample_statistic(cfg.family, cfg.theta_true, rng, size=cfg.N))
    return ComparisonSet.from_arrays(t, cfg.family, [cfg.sample_size] * cfg.N)


def _di_block(args):
    cfg, theta1, theta0, indices, q, optim = args
    cache = ComplexityCache()
    out = []
    for r in indices:
        obs = _replicate_obs(cfg, r)
        row = scheme_rows(obs, cfg.weight_scheme, theta0.point)[0]
        rep = discrimination_information(0, theta1, theta0, row, obs, Mode(cfg.mode), q, optim, cache)
        out.append(rep.di_bits)
    return out


def _blocks(R, workers):
    n_blocks = max(1, min(R, 4 * workers))
    edges = np.linspace(0, R, n_blocks + 1).astype(int)
    return [range(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def simulate_di(cfg: SimulationConfig, theta1: ParameterSpace, theta0: ParameterSpace,
                workers: int = 1, q: QuadratureConfig | None = None,
                optim: OptimConfig | None = None) -> np.ndarray:
    """Information (bits) in comparison 0 of every replicate, in replicate order."""
    q = q or QuadratureConfig()
    optim = optim or OptimConfig()
    jobs = [(cfg, theta1, theta0, b, q, optim) for b in _blocks(cfg.replicates, workers)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_di_block, jobs))
    else:
        parts = [_di_block(j) for j in jobs]
    return np.array([d for part in parts for d in part])


def exceedance_table(di_bits: np.ndarray, thresholds) -> list[dict]:
    """Rate of ``2**di >= k`` per threshold, with its bound ``1/k + 3 SE``."""
    R = len(di_bits)
    rows = []
    for k in thresholds:
        hits = int(np.sum(di_bits >= math.log2(k)))
        rate = hits / R
        se = binomial_se(rate, R)
        bound = 1.0 / k + 3.0 * se
        rows.append({"k": float(k), "exceedances": hits, "replicates": R, "rate": rate, "se": se,
                     "bound": bound, "passed": bool(rate <= bound)})
    return rows


def misleading_evidence_rate(cfg: SimulationConfig, theta0: float, theta1_space: ParameterSpace,
                             workers: int = 1, q: QuadratureConfig | None = None,
                             optim: OptimConfig | None = None) -> VerificationReport:
    """How often the information exceeds ``log2 k`` bits for the alternative under the null.

    The likelihood-ratio bound says at most ``1/k``; a threshold fails when
    its rate exceeds ``1/k + 3 SE``.
    """
    if cfg.theta_true != theta0:
        raise ConfigError("misleading evidence is simulated under the null: theta_true must equal theta0")
    di = simulate_di(cfg, theta1_space, ParameterSpace.singleton(theta0), workers, q, optim)
    table = exceedance_table(di, cfg.thresholds)
    config = cfg.describe() | {"theta0": theta0, "alternative": theta1_space.label}
    return VerificationReport("misleading_evidence", config, thresholds=table,
                              passed=all(r["passed"] for r in table))


def _non_increasing(values, ses, slack=2.0):
    return all(b <= a + slack * math.hypot(sa, sb)
               for a, b, sa, sb in zip(values, values[1:], ses, ses[1:]))


def _mixture_obs(cfg: SimulationConfig, N: int, r: int) -> ComparisonSet:
    rng = replicate_rng(cfg.seed, r)
    theta = np.where(rng.random(N) < 0.5, 0.0, 1.0)
    t = np.array([float(sample_statistic(cfg.family, th, rng)) for th in theta])
    return ComparisonSet.from_arrays(t, cfg.family, [cfg.sample_size] * N)


def complexity_gap(obs: ComparisonSet, space: ParameterSpace, q=None, optim=None) -> float:
    """``|exact - approximate|`` log-complexity for comparison 0 under single-observation weights."""
    row = single_observation_weights(0, obs[0].sample_size, len(obs))
    exact = log_complexity(0, space, row, obs, Mode.EXACT, q, optim).log_complexity
    approx = log_complexity(0, space, row, obs, Mode.APPROXIMATE, q, optim).log_complexity
    return abs(exact - approx)


def complexity_convergence(cfg: SimulationConfig, Ns, tolerance: float = 0.05,
                           q: QuadratureConfig | None = None,
                           optim: OptimConfig | None = None) -> VerificationReport:
    """Mean exact-vs-approximate complexity gap as ``N`` grows.

    Statistics are drawn independently from a 50/50 mixture of
    ``theta = 0`` and ``theta = 1``.  Passes when the gaps are non-increasing
    within 2 SE and the largest-``N`` gap is below ``tolerance`` nats.
    """
    Ns = [int(N) for N in Ns]
    if any(N < 2 for N in Ns):
        raise ConfigError("complexity convergence needs N >= 2")
    space = (ParameterSpace.full_line() if cfg.family.kind is Kind.NORMAL
             else ParameterSpace.half_line())
    gaps, ses, rows = [], [], []
    for N in Ns:
        g = np.array([complexity_gap(_mixture_obs(cfg, N, r), space, q, optim)
                      for r in range(cfg.replicates)])
        mean, se = float(g.mean()), float(g.std(ddof=1) / math.sqrt(len(g)))
        gaps.append(mean)
        ses.append(se)
        rows.append({"N": N, "mean_gap": mean, "se": se, "replicates": cfg.replicates})
    trend_ok = _non_increasing(gaps, ses)
    final_ok = gaps[-1] < tolerance
    config = cfg.describe() | {"Ns": Ns, "tolerance": tolerance, "mixture": [0.0, 1.0]}
    notes = [TREND_NOTE]
    if not trend_ok:
        notes.append("gaps increase by more than 2 SE somewhere")
    if not final_ok:
        notes.append(f"largest-N gap {gaps[-1]:.4g} is not below {tolerance}")
    return VerificationReport("complexity_convergence", config, complexity_gaps=rows,
                              passed=bool(trend_ok and final_ok), notes=notes)


def _family_at(template: FamilyInstance, n: int) -> FamilyInstance:
    if template.kind is Kind.NORMAL:
        return FamilyInstance.normal(template.scale / math.sqrt(n))
    return FamilyInstance.folded_t(n, n)


def interpretability_trend(cfg: SimulationConfig, n_grid, k: float = 8.0, workers: int = 1,
                           q: QuadratureConfig | None = None,
                           optim: OptimConfig | None = None) -> VerificationReport:
    """Misleading-evidence rate at threshold ``k`` as the per-comparison sample size grows.

    Folded-t families use ``m = n``; normal families use ``sigma / sqrt(n)``
    with ``n_i = n``.  Passes when the rates are non-increasing within 2 SE.
    """
    if not k >= 1.0:
        raise ConfigError(f"threshold k must be >= 1, got {k}")
    theta1 = (ParameterSpace.punctured(cfg.theta_true) if cfg.family.kind is Kind.NORMAL
              else ParameterSpace.half_line())
    rates, ses, rows = [], [], []
    for n in n_grid:
        n = int(n)
        fam = _family_at(cfg.family, n)
        sub = SimulationConfig(fam, cfg.theta_true, cfg.N, cfg.replicates, cfg.seed,
                               cfg.weight_scheme, (k,), cfg.mode,
                               n if fam.kind is Kind.NORMAL else None)
        rep = misleading_evidence_rate(sub, cfg.theta_true, theta1, workers, q, optim)
        row = rep.thresholds[0]
        rates.append(row["rate"])
        ses.append(row["se"])
        rows.append({"n": n, "k": k, "rate": row["rate"], "se": row["se"],
                     "replicates": cfg.replicates})
    ok = _non_increasing(rates, ses)
    config = cfg.describe() | {"n_grid": [int(n) for n in n_grid], "k": k}
    notes = [TREND_NOTE] + ([] if ok else ["rate increases by more than 2 SE somewhere"])
    return VerificationReport("interpretability_trend", config, trend=rows, passed=bool(ok),
                              notes=notes)


def quantile_grid(family: FamilyInstance, theta: float, grid_size: int) -> np.ndarray:
    """``grid_size`` quantiles of the statistic under ``theta`` at probabilities ``(k + 1/2)/size``."""
    p = (np.arange(grid_size) + 0.5) / grid_size
    if family.kind is Kind.NORMAL:
        return stats.norm.ppf(p, loc=theta, scale=family.scale)
    df, ncp = family.df, family.ncp_factor * theta

    def cdf(t):
        return stats.nct.cdf(t, df, ncp) - stats.nct.cdf(-t, df, ncp)

    hi = 1.0
    while cdf(hi) < p[-1]:
        hi *= 2.0
    return np.array([optimize.brentq(lambda t: cdf(t) - pk, 0.0, hi, xtol=1e-12) for pk in p])


def regret_sweep(i: int, space: ParameterSpace, row: WeightRow, obs: ComparisonSet,
                 grid_size: int, predictive=None, q: QuadratureConfig | None = None,
                 optim: OptimConfig | None = None) -> float:
    """Largest ``|regret(t) - complexity|`` in bits over a grid of focus values.

    The default predictive is the exact NMWL with its complexity recomputed
    from scratch at every substituted ``t``, so the result measures how far
    the computed regret is from constant.  ``predictive`` may instead be a
    callable ``t -> log density`` (for instance a fitted plug-in density).
    A grid of one point uses the observed ``t_i``.
    """
    q = q or QuadratureConfig()
    optim = optim or OptimConfig()
    ref = parametric_complexity_exact(i, space, row, obs, q, optim).log_complexity
    if grid_size < 1:
        raise ConfigError("grid_size must be >= 1")
    if grid_size == 1:
        grid = np.array([obs[i].statistic])
    else:
        theta = weighted_mle(space, row, obs, optim).theta_hat
        grid = quantile_grid(obs.family(i), theta, grid_size)
    worst = 0.0
    for t in grid:
        sub = obs.substitute(i, float(t))
        prof = profile_log_wlik(i, float(t), space, row, sub, optim)
        if predictive is None:
            c = parametric_complexity_exact(i, space, row, sub, q, optim).log_complexity
            pred = prof - c
        else:
            pred = float(predictive(float(t)))
        # regret - complexity, arranged so a recomputed complexity equal to
        # the reference cancels exactly
        worst = max(worst, abs((prof - ref) - pred) / LN2)
    return worst


def asymptotic_trend(sigma: float, n_grid, lo: float = 0.0, hi: float = 1.0,
                     q: QuadratureConfig | None = None) -> VerificationReport:
    """Exact complexity over a bounded interval against its large-sample formula.

    The focus statistic is a mean of ``n`` observations (scale
    ``sigma / sqrt(n)``) with a single-observation-weighted incidental
    comparison fixed at the interval's midpoint; its weight, and with it
    every departure from the unweighted case, vanishes as ``n`` grows.
    Diagnostic: passes when the gap shrinks along the grid.
    """
    space = ParameterSpace.bounded(lo, hi)
    mid = 0.5 * (lo + hi)
    gaps, rows = [], []
    for n in n_grid:
        n = int(n)
        obs = ComparisonSet.normal([mid, mid], [sigma / math.sqrt(n), sigma], [n, 1])
        row = single_observation_weights(0, n, 2)
        exact = parametric_complexity_exact(0, space, row, obs, q).log_complexity
        asym = asymptotic_complexity_normal(space, n, sigma)
        gaps.append(abs(exact - asym))
        rows.append({"n": n, "exact": exact, "asymptotic": asym, "gap": gaps[-1]})
    ok = all(b <= a for a, b in zip(gaps, gaps[1:]))
    return VerificationReport("asymptotic_complexity", {"sigma": sigma, "interval": [lo, hi],
                                                       "n_grid": [int(n) for n in n_grid]},
                              trend=rows, passed=bool(ok), notes=[TREND_NOTE])
