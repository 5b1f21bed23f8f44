"""Adaptive Gauss-Kronrod integration of ``exp(log f)`` in log space.

Integrands here are maximized likelihoods, which under- or overflow long
before their integrals become interesting, so everything is carried
relative to a running maximum of ``log f``.  Infinite ranges are handled by
a truncation window that is doubled until the added tail mass is
negligible; tails that refuse to shrink are reported as divergence.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergentComplexity, InvalidParameter, NumericalFailure

# 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21)
_XK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0,
])
_WK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600525478492, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])
NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
W_KRONROD = np.concatenate([_WK[:-1], _WK[::-1]])
W_GAUSS = np.zeros(21)
_gauss_pos = [1, 3, 5, 7, 9]
for _k, _w in zip(_gauss_pos, _WG):
    W_GAUSS[_k] = _w
    W_GAUSS[20 - _k] = _w
EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    truncation_mass: float = 1e-12
    max_subdivisions: int = 4000
    max_doublings: int = 80
    divergence_doublings: int = 6

    def __post_init__(self):
        if min(self.rel_tol, self.abs_tol, self.truncation_mass) <= 0:
            raise InvalidParameter("quadrature tolerances must be positive")
        if self.truncation_mass >= 1e-6:
            raise InvalidParameter("truncation_mass must be below 1e-6")
        if self.max_subdivisions < 1 or self.max_doublings < 1 or self.divergence_doublings < 1:
            raise InvalidParameter("quadrature limits must be positive")


class LogIntegrator:
    """Accumulates ``int exp(logf)`` over a growing set of panels.

    ``logf`` maps a 1-d array of abscissae to log integrand values.  Panel
    values and error estimates are stored scaled by ``exp(-shift)``.
    """

    def __init__(self, logf, q: QuadratureConfig):
        self.logf = logf
        self.q = q
        self.shift = None
        self.heap = []  # (-err, counter, a, b, val, err, tag)
        self.count = 0
        self.nodes = 0
        self.total = 0.0
        self.errsum = 0.0
        self.tag_totals = {}

    def _rules(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        c = 0.5 * (a + b)
        h = 0.5 * (b - a)
        x = c[:, None] + h[:, None] * NODES[None, :]
        lf = np.asarray(self.logf(x.ravel()), dtype=float).reshape(x.shape)
        self.nodes += x.size
        lf = np.where(np.isnan(lf), -np.inf, lf)
        top = lf.max()
        if np.isfinite(top) and (self.shift is None or top > self.shift):
            self._rescale(top)
        shift = 0.0 if self.shift is None else self.shift
        f = np.exp(lf - shift)
        resk = f @ W_KRONROD
        resg = f @ W_GAUSS
        resabs = np.abs(f) @ W_KRONROD
        resasc = np.abs(f - 0.5 * resk[:, None]) @ W_KRONROD
        err = np.abs(resk - resg)
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
        err = np.where((resasc > 0) & (err > 0), scaled, err)
        err = np.maximum(err, 50.0 * EPS * resabs)
        return resk * h, err * np.abs(h)

    def _rescale(self, new_shift):
        if self.shift is not None:
            factor = math.exp(self.shift - new_shift)
            self.heap = [(-e * factor, k, a, b, v * factor, e * factor, tag)
                         for (_, k, a, b, v, e, tag) in self.heap]
            heapq.heapify(self.heap)
            self.total *= factor
            self.errsum *= factor
            self.tag_totals = {t: v * factor for t, v in self.tag_totals.items()}
        self.shift = new_shift

    def _push(self, a, b, v, e, tag):
        self.count += 1
        heapq.heappush(self.heap, (-e, self.count, a, b, v, e, tag))
        self.total += v
        self.errsum += e
        self.tag_totals[tag] = self.tag_totals.get(tag, 0.0) + v

    def add(self, a, b, tag, pieces=4):
        """Add the interval ``[a, b]`` split into equal panels."""
        if not b > a:
            return
        edges = np.linspace(a, b, pieces + 1)
        vals, errs = self._rules(edges[:-1], edges[1:])
        for lo, hi, v, e in zip(edges[:-1], edges[1:], vals, errs):
            self._push(float(lo), float(hi), float(v), float(e), tag)

    def _target(self):
        return max(self.q.abs_tol, self.q.rel_tol * abs(self.total))

    def refine(self):
        """Bisect the worst panels until the error estimate meets tolerance."""
        while self.errsum > self._target():
            if len(self.heap) >= self.q.max_subdivisions:
                raise NumericalFailure(
                    f"quadrature did not converge in {self.q.max_subdivisions} panels "
                    f"(error {self.errsum:.3g} vs target {self._target():.3g})")
            # split up to 4 worst panels per pass to amortize evaluation calls
            batch = []
            while self.heap and len(batch) < 4:
                item = heapq.heappop(self.heap)
                batch.append(item)
                if self.errsum - sum(it[5] for it in batch) <= self._target():
                    break
            lefts, rights, tags = [], [], []
            for (_, _, a, b, v, e, tag) in batch:
                self.total -= v
                self.errsum -= e
                self.tag_totals[tag] -= v
                m = 0.5 * (a + b)
                lefts += [a, m]
                rights += [m, b]
                tags += [tag, tag]
            vals, errs = self._rules(np.array(lefts), np.array(rights))
            for a, b, v, e, tag in zip(lefts, rights, vals, errs, tags):
                self._push(a, b, float(v), float(e), tag)
            # guard against accumulated cancellation drift
            if self.count % 64 == 0:
                self.total = sum(it[4] for it in self.heap)
                self.errsum = sum(it[5] for it in self.heap)

    def log_value(self):
        if self.shift is None or not self.total > 0:
            return -math.inf
        return self.shift + math.log(self.total)

    def relative_error(self):
        return self.errsum / self.total if self.total > 0 else math.inf


def log_integrate(logf, support, center, half_width, q: QuadratureConfig | None = None):
    """``log int exp(logf(t)) dt`` over ``support``.

    The window starts as ``center +/- half_width`` (clipped to the support)
    and doubles until the mass added by a doubling, together with a
    geometric extrapolation of what remains, falls below
    ``q.truncation_mass`` relative to the total.  Raises
    :class:`DivergentComplexity` when ``q.divergence_doublings`` consecutive
    doublings each add more than ``q.rel_tol`` of the total without the
    added mass at least halving.

    Returns ``(log_value, relative_error_estimate, nodes_used)``.
    """
    q = q or QuadratureConfig()
    s_lo, s_hi = support
    half = float(half_width)
    if not half > 0:
        raise InvalidParameter("half_width must be positive")
    a, b = max(s_lo, center - half), min(s_hi, center + half)
    if not b > a:
        a, b = s_lo, min(s_hi, s_lo + 2 * half)
    integ = LogIntegrator(logf, q)
    integ.add(a, b, tag=0, pieces=8)
    integ.refine()
    prev_inc = None
    streak = 0
    tail_est = math.inf
    for k in range(1, q.max_doublings + 1):
        if a <= s_lo and b >= s_hi:
            tail_est = 0.0
            break
        width = b - a
        # grow by the full width on one side when the other is pinned at the support
        grow_lo = width / 2.0 if b < s_hi else width
        grow_hi = width / 2.0 if a > s_lo else width
        na = max(s_lo, a - grow_lo) if a > s_lo else a
        nb = min(s_hi, b + grow_hi) if b < s_hi else b
        integ.add(na, a, tag=k, pieces=1)
        integ.add(b, nb, tag=k, pieces=1)
        integ.refine()
        a, b = na, nb
        inc = integ.tag_totals.get(k, 0.0)
        total = integ.total
        if not total > 0:
            prev_inc = inc
            continue
        rel = inc / total
        if prev_inc is not None and prev_inc > 0 and inc < prev_inc:
            r = inc / prev_inc
            tail_est = rel * r / (1.0 - r)
        else:
            tail_est = math.inf
        if rel > q.rel_tol and (prev_inc is None or inc >= 0.5 * prev_inc):
            streak += 1
            if streak >= q.divergence_doublings:
                raise DivergentComplexity(
                    f"integrand does not decay: {streak} window doublings each added "
                    f"more than {q.rel_tol:g} of the integral")
        else:
            streak = 0
        prev_inc = inc
        if rel <= q.truncation_mass and tail_est <= q.truncation_mass:
            break
    else:
        raise DivergentComplexity(f"tail mass still above truncation after {q.max_doublings} doublings")
    err = integ.relative_error() + (0.0 if not math.isfinite(tail_est) else tail_est)
    return integ.log_value(), err, integ.nodes
