"""Fractional power-series expansion of the reduced solution near x = 0.

The reduced equation

    x^2 u'' = a x u' + b u - (u' - 1)^2 / 2,   u(0) = 0,

admits a formal expansion u ~ x + sum_i k_i x^(1+i/2) whose coefficients obey
a quadratic recursion.  The series generally has zero radius of convergence,
so evaluation must truncate adaptively; it is nevertheless the most accurate
evaluator available near the singular origin, where any grid is sparse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import ReducedParams


@dataclass(frozen=True)
class SeriesExpansion:
    """Truncated expansion u ~ x + sum_{i=1}^{n} k_i x^(1+i/2).

    ``coeffs[0]`` is k_1, the coefficient of x^(3/2); it equals
    -(2/3)*sqrt(2*(a+b)) and is negative whenever a + b > 0.
    """

    a: float
    b: float
    coeffs: tuple[float, ...]

    @property
    def order(self) -> int:
        return len(self.coeffs)


@dataclass(frozen=True)
class SingularityConstants:
    """Algebraic constants controlling the singular structure at x = 0.

    K1 = 6a + 4b - 3 and K2 = 6a + 2b - 9 decide whether the expansion
    terminates (K1 = 0 or K2 = 0).  Neighbouring solutions through the same
    expansion separate like x^alpha * exp(-beta/sqrt(x)) with
    alpha = 2 - (2/3)b and beta = sqrt(8*(a+b)); the constants are exposed
    for diagnostics only.
    """

    K1: float
    K2: float
    alpha: float
    beta: float


def singularity_constants(reduced: ReducedParams) -> SingularityConstants:
    a, b = reduced.a, reduced.b
    return SingularityConstants(
        K1=6.0 * a + 4.0 * b - 3.0,
        K2=6.0 * a + 2.0 * b - 9.0,
        alpha=2.0 - (2.0 / 3.0) * b,
        beta=math.sqrt(8.0 * (a + b)),
    )


def series_coefficients(reduced: ReducedParams, n: int) -> SeriesExpansion:
    """Compute k_1..k_n by the coefficient recursion.

    k_1 = -(2/3)*sqrt(2*(a+b)) and, for m >= 1,

        k_{m+1} = [ k_m*((m+2)*(2a-m) + 4b)
                    - (1/2)*sum_{j=1}^{m-1} (3+j)*(m-j+3)*k_{j+1}*k_{m-j+1} ]
                  / (3*(m+3)*k_1).

    The recursion is validated against an undetermined-coefficients oracle in
    the test suite; matching is part of the release gate for this module.
    """
    if n < 1:
        raise ValidationError(f"series order must be >= 1, got {n}")
    a, b = reduced.a, reduced.b
    k1 = -(2.0 / 3.0) * math.sqrt(2.0 * (a + b))
    k = [k1]
    for m in range(1, n):
        lead = k[m - 1] * ((m + 2) * (2.0 * a - m) + 4.0 * b)
        cross = 0.0
        for j in range(1, m):
            cross += (3 + j) * (m - j + 3) * k[j] * k[m - j]
        k.append((lead - 0.5 * cross) / (3.0 * (m + 3) * k1))
    return SeriesExpansion(a=a, b=b, coeffs=tuple(k))


def _horner_pair_numpy(s, k, kd):
    pu = np.zeros_like(s)
    pd = np.zeros_like(s)
    for j in range(k.size - 1, -1, -1):
        pu = (pu + k[j]) * s
        pd = (pd + kd[j]) * s
    return pu, pd


try:  # compiled twin of _horner_pair_numpy with identical operation order
    from numba import njit

    @njit(cache=True)
    def _horner_pair(s, k, kd):  # pragma: no cover
        pu = np.zeros_like(s)
        pd = np.zeros_like(s)
        for i in range(s.size):
            si = s[i]
            a = 0.0
            b = 0.0
            for j in range(k.size - 1, -1, -1):
                a = (a + k[j]) * si
                b = (b + kd[j]) * si
            pu[i] = a
            pd[i] = b
        return pu, pd
except ImportError:  # pragma: no cover
    _horner_pair = _horner_pair_numpy


def series_eval(exp: SeriesExpansion, x, order: int | None = None):
    """Evaluate (u, du) of the truncated expansion at x >= 0.

    u  = x + sum_{i<=order} k_i x^(1+i/2)
    du = 1 + sum_{i<=order} k_i (1+i/2) x^(i/2)

    At x = 0 this returns (0, 1) exactly.  Accepts scalars or arrays.
    """
    m = exp.order if order is None else order
    if not 1 <= m <= exp.order:
        raise ValidationError(f"order must be in [1, {exp.order}], got {m}")
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0):
        raise ValidationError("series_eval requires x >= 0")
    s = np.sqrt(arr)
    k = np.array(exp.coeffs[:m])
    kd = k * (1.0 + 0.5 * np.arange(1, m + 1))
    # Horner in s = sqrt(x): u = x*(1 + P(s)), du = 1 + Q(s).
    pu, pd = _horner_pair(np.atleast_1d(s), k, kd)
    u = arr * (1.0 + pu.reshape(arr.shape))
    du = 1.0 + pd.reshape(arr.shape)
    if np.isscalar(x) or arr.ndim == 0:
        return float(u), float(du)
    return u, du


def optimal_truncation(exp: SeriesExpansion, x: float) -> int:
    """Truncation order m <= n minimising the term magnitude |k_m x^(1+m/2)|.

    Because the expansion diverges, accuracy at a given x > 0 is best when the
    sum stops at its smallest term; evaluation restricted to the first m terms
    is the recommended near-origin evaluator.
    """
    if not x > 0.0:
        raise ValidationError(f"optimal_truncation requires x > 0, got {x}")
    s = math.sqrt(x)
    best_m, best_mag = 1, abs(exp.coeffs[0]) * x * s
    mag_pow = x * s
    for i in range(2, exp.order + 1):
        mag_pow *= s
        mag = abs(exp.coeffs[i - 1]) * mag_pow
        if mag < best_mag:
            best_m, best_mag = i, mag
    return best_m


@dataclass(frozen=True)
class SpecialSolution:
    """Terminating three-term closed form h(x) = x + k1 x^(3/2) + k2 x^2.

    Exists exactly when K1 = 0 or K2 = 0; then the expansion ends and h solves
    the reduced equation identically.  It is one member of a continuum of
    solutions through the origin and is *not* the value-function branch (that
    branch is selected by the decaying-derivative condition at infinity), so
    it serves only as an exact residual oracle for the solver.
    """

    a: float
    b: float
    k1: float
    k2: float

    def eval(self, x):
        arr = np.asarray(x, dtype=float)
        s = np.sqrt(arr)
        h = arr + self.k1 * arr * s + self.k2 * arr * arr
        dh = 1.0 + 1.5 * self.k1 * s + 2.0 * self.k2 * arr
        if np.isscalar(x) or arr.ndim == 0:
            return float(h), float(dh)
        return h, dh

    def residual(self, x):
        """Pointwise residual x^2 h'' - a x h' - b h + (h'-1)^2/2 (zero up to rounding)."""
        arr = np.asarray(x, dtype=float)
        s = np.sqrt(arr)
        h, dh = self.eval(arr)
        d2h = 0.75 * self.k1 / s + 2.0 * self.k2
        return arr * arr * d2h - self.a * arr * dh - self.b * h + 0.5 * (dh - 1.0) ** 2


def special_solution(reduced: ReducedParams, zero_tol: float = 1e-12) -> SpecialSolution | None:
    """Return the terminating closed form when K1 or K2 vanishes, else None.

    K1/K2 are exact algebraic conditions on the inputs, so the zero test uses
    an absolute tolerance (default 1e-12).
    """
    con = singularity_constants(reduced)
    if abs(con.K1) > zero_tol and abs(con.K2) > zero_tol:
        return None
    a, b = reduced.a, reduced.b
    k1 = -(2.0 / 3.0) * math.sqrt(2.0 * (a + b))
    # Matching at order x^2 gives k2 = K1/12; K1 = 0 degenerates to a two-term form.
    k2 = con.K1 / 12.0
    return SpecialSolution(a=a, b=b, k1=k1, k2=k2)
