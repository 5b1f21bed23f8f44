"""Likelihood weight rows.

A row ``w_i = (w_i1, ..., w_iN)`` weights the log-likelihood of every
comparison when comparison ``i`` is in focus; a row may also carry a weight
on a data-independent pseudo-statistic ``t0``.  Rows are built in exact
rational arithmetic and converted to floats at the end.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import InvalidArity, InvalidParameter, InvalidWeights

SUM_TOL = 1e-12


@dataclass(frozen=True)
class WeightRow:
    focus_index: int
    weights: tuple[float, ...]
    pseudo_weight: float | None = None
    pseudo_statistic: float | None = None
    scheme: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @property
    def focus_weight(self) -> float:
        return self.weights[self.focus_index]

    @property
    def has_pseudo(self) -> bool:
        return self.pseudo_weight is not None

    def __len__(self):
        return len(self.weights)


def validate_weights(row: WeightRow) -> list[str]:
    """Return the names of violated constraints (empty list when valid).

    Checked: ``nonnegativity``, ``focus-dominance`` (``w_ii >= w_ij`` for
    every ``j``, pseudo weight included), ``unit-sum`` (to 1e-12) and
    ``pseudo-pairing`` (weight and statistic present together).
    """
    violations = []
    w = list(row.weights)
    if not 0 <= row.focus_index < len(w):
        return ["focus-index"]
    others = w[:row.focus_index] + w[row.focus_index + 1:]
    if (row.pseudo_weight is None) != (row.pseudo_statistic is None):
        violations.append("pseudo-pairing")
    if row.pseudo_weight is not None:
        others.append(row.pseudo_weight)
    if any(not v >= 0 for v in w + others):
        violations.append("nonnegativity")
    if any(v > w[row.focus_index] for v in others):
        violations.append("focus-dominance")
    total = sum(w) + (row.pseudo_weight or 0.0)
    if abs(total - 1.0) > SUM_TOL:
        violations.append("unit-sum")
    return violations


def require_valid(row: WeightRow) -> WeightRow:
    bad = validate_weights(row)
    if bad:
        raise InvalidWeights(bad)
    return row


def _check_index(i, N):
    if not 0 <= i < N:
        raise InvalidParameter(f"focus index {i} outside 0..{N - 1}")


def _check_n(n_i):
    if int(n_i) != n_i or n_i < 1:
        raise InvalidParameter(f"sample size must be a positive integer, got {n_i}")
    return int(n_i)


def single_observation_weights(i: int, n_i: int, N: int) -> WeightRow:
    """Weights giving all incidental comparisons together one observation's weight.

    ``w_ii = 1 - 1/(n_i + 1)`` and ``w_ij = 1/((n_i + 1)(N - 1))`` for
    ``j != i``.  Indices are zero-based.
    """
    if N < 2:
        raise InvalidArity(f"single-observation weights need N >= 2, got {N}")
    _check_index(i, N)
    n_i = _check_n(n_i)
    spare = Fraction(1, n_i + 1)
    off = spare / (N - 1)
    exact = [off] * N
    exact[i] = 1 - spare
    return WeightRow(i, tuple(float(v) for v in exact), scheme="sites")


def null_pseudo_weights(n_1: int, t0: float, N: int = 1, i: int = 0) -> WeightRow:
    """Pseudo-statistic weighting used when no incidental data are wanted.

    The focus gets ``1 - 1/(n_1 + 1)`` and ``t0`` gets ``1/(n_1 + 1)``.  With
    ``N > 1`` the row is padded with zero weights so it can index into a
    larger comparison set.
    """
    n_1 = _check_n(n_1)
    _check_index(i, N)
    spare = Fraction(1, n_1 + 1)
    exact = [Fraction(0)] * N
    exact[i] = 1 - spare
    return WeightRow(i, tuple(float(v) for v in exact), pseudo_weight=float(spare),
                     pseudo_statistic=float(t0), scheme="null")


def blended_weights(i: int, n_i: int, N: int, t0: float) -> WeightRow:
    """Pseudo-statistic weighted like each of the ``N - 1`` incidental comparisons.

    Every off-focus term, ``t0`` included, gets ``1/((n_i + 1) N)``.
    """
    if N < 1:
        raise InvalidArity(f"N must be >= 1, got {N}")
    _check_index(i, N)
    n_i = _check_n(n_i)
    spare = Fraction(1, n_i + 1)
    off = spare / N
    exact = [off] * N
    exact[i] = 1 - spare
    return WeightRow(i, tuple(float(v) for v in exact), pseudo_weight=float(off),
                     pseudo_statistic=float(t0), scheme="blended")


def custom_weights(i: int, weights, pseudo_weight=None, pseudo_statistic=None) -> WeightRow:
    """A user-supplied row; rejected unless it passes :func:`validate_weights`."""
    row = WeightRow(i, tuple(weights), pseudo_weight, pseudo_statistic, scheme="custom")
    return require_valid(row)
