import math

import mpmath
import numpy as np
import pytest
import sympy as sp

from optliq import (ReducedParams, ValidationError, optimal_truncation,
                    series_coefficients, series_eval, singularity_constants,
                    special_solution)


def sympy_coefficients(a, b, n):
    """Undetermined-coefficients oracle, independent of the recursion.

    Substitute h = t^2 + sum k_i t^(2+i) (t = sqrt(x)) into the reduced
    equation, form the polynomial residual 8 t^2 R(t), and solve the
    triangular linear system order by order.  All calculus is done by sympy.
    """
    t = sp.Symbol("t", positive=True)
    ks = [sp.Symbol(f"k{i}") for i in range(1, n + 1)]
    h = t ** 2 + sum(ks[i - 1] * t ** (2 + i) for i in range(1, n + 1))
    h_t = sp.diff(h, t)
    h_tt = sp.diff(h, t, 2)
    # x = t^2: x^2 h'' - a x h' - b h + (h'-1)^2/2, multiplied by 8 t^2
    resid = (2 * t ** 4 * h_tt - 2 * t ** 3 * h_t - 4 * a * t ** 3 * h_t
             - 8 * b * t ** 2 * h + (h_t - 2 * t) ** 2)
    poly = sp.Poly(sp.expand(resid), t)
    solved: dict[sp.Symbol, float] = {}
    # order x^(1+m/2) corresponds to t^(4+m) after the 8 t^2 scaling
    k1_eq = poly.coeff_monomial(t ** 4).subs(solved)
    sols = sp.solve(sp.Eq(k1_eq, 0), ks[0])
    k1 = min(float(s) for s in sols)  # negative branch
    solved[ks[0]] = k1
    out = [k1]
    for m in range(1, n):
        eq = poly.coeff_monomial(t ** (4 + m)).subs(solved)
        km1 = sp.solve(sp.Eq(eq, 0), ks[m])
        assert len(km1) == 1, "equation must be linear in the next coefficient"
        val = float(km1[0])
        solved[ks[m]] = val
        out.append(val)
    return out


def mp_coefficients(a, b, n):
    """Expansion coefficients recomputed in working precision.

    The float64 coefficients carry ~1e-16 relative rounding, which the
    x^(-(n+2)/2) scaling of the residual amplifies beyond the signal for
    small x; the residual oracle therefore needs full-precision inputs.
    (Coefficient values themselves are checked against the sympy oracle.)
    """
    am, bm = mpmath.mpf(a), mpmath.mpf(b)
    k = [-mpmath.mpf(2) / 3 * mpmath.sqrt(2 * (am + bm))]
    for m in range(1, n):
        lead = k[m - 1] * ((m + 2) * (2 * am - m) + 4 * bm)
        cross = mpmath.mpf(0)
        for j in range(1, m):
            cross += (3 + j) * (m - j + 3) * k[j] * k[m - j]
        k.append((lead - cross / 2) / (3 * (m + 3) * k[0]))
    return k


def mp_residual(a, b, coeffs, x):
    """Reduced-equation residual of the truncated expansion in mpmath.

    Needed because the residual is an o(x^((n+2)/2)) cancellation out of
    O(x)-sized terms; at x = 1e-8 that is far below double rounding.
    """
    xm = mpmath.mpf(x)
    h = xm
    dh = mpmath.mpf(1)
    d2h = mpmath.mpf(0)
    for i, k in enumerate(coeffs, start=1):
        p = 1 + mpmath.mpf(i) / 2
        km = mpmath.mpf(k)
        h += km * xm ** p
        dh += km * p * xm ** (p - 1)
        d2h += km * p * (p - 1) * xm ** (p - 2)
    r = xm ** 2 * d2h - mpmath.mpf(a) * xm * dh - mpmath.mpf(b) * h + (dh - 1) ** 2 / 2
    return float(r / xm ** (mpmath.mpf(len(coeffs) + 2) / 2))


def test_k1_closed_form():
    exp = series_coefficients(ReducedParams(2.0, 0.5), 1)
    assert exp.coeffs[0] == pytest.approx(-(2.0 / 3.0) * math.sqrt(5.0), rel=1e-15)
    assert exp.coeffs[0] == pytest.approx(-1.4907119849998598, rel=1e-12)


def test_k1_vanishes_as_sum_goes_to_zero():
    exp = series_coefficients(ReducedParams(1.0, -1.0 + 1e-12), 1)
    assert -1e-5 < exp.coeffs[0] < 0.0


def test_recursion_matches_sympy_oracle():
    rng = np.random.default_rng(7)
    for _ in range(6):
        a = round(float(rng.uniform(-4.0, 4.0)), 3)
        b = round(float(rng.uniform(-4.0, 8.0)), 3)
        if a + b <= 1e-3:
            b = 1e-3 + abs(b) + abs(a)
        exp = series_coefficients(ReducedParams(a, b), 8)
        ref = sympy_coefficients(a, b, 8)
        for k_have, k_want in zip(exp.coeffs, ref):
            assert k_have == pytest.approx(k_want, rel=1e-10, abs=1e-12)


def test_series_eval_origin_is_exact():
    exp = series_coefficients(ReducedParams(2.0, 0.5), 6)
    u, du = series_eval(exp, 0.0)
    assert u == 0.0 and du == 1.0


def test_series_eval_two_term_value():
    exp = series_coefficients(ReducedParams(2.0, 0.5), 1)
    x = 1e-4
    u, du = series_eval(exp, x)
    k1 = -(2.0 / 3.0) * math.sqrt(5.0)
    assert u == pytest.approx(x + k1 * x ** 1.5, rel=1e-14)
    assert du == pytest.approx(1.0 + 1.5 * k1 * math.sqrt(x), rel=1e-14)


def test_series_eval_vectorized_and_validated():
    exp = series_coefficients(ReducedParams(2.0, 0.5), 6)
    xs = np.geomspace(1e-8, 1e-2, 11)
    u, du = series_eval(exp, xs)
    for xi, ui, dui in zip(xs, u, du):
        us, dus = series_eval(exp, float(xi))
        assert ui == us and dui == dus
    with pytest.raises(ValidationError):
        series_eval(exp, -1e-9)
    with pytest.raises(ValidationError):
        series_coefficients(ReducedParams(2.0, 0.5), 0)
    with pytest.raises(ValidationError):
        ReducedParams(1.0, -1.0)


def test_residual_order_bounded_and_matches_leading_constant():
    red = ReducedParams(2.0, 0.5)
    with mpmath.workdps(50):
        for n in range(1, 7):
            ext = mp_coefficients(red.a, red.b, n + 1)
            predicted = float(-mpmath.mpf(3) / 4 * (n + 3) * ext[0] * ext[n])
            vals = [mp_residual(red.a, red.b, ext[:n], x)
                    for x in np.geomspace(1e-8, 1e-4, 9)]
            ratio = max(abs(v) for v in vals) / min(abs(v) for v in vals)
            assert ratio < 1.5, f"scaled residual not flat for n={n}"
            assert vals[0] == pytest.approx(predicted, rel=0.05)
            # full-precision recursion agrees with the float implementation
            exp = series_coefficients(red, n)
            for kf, km in zip(exp.coeffs, ext):
                assert kf == pytest.approx(float(km), rel=1e-12)


def test_singularity_constants():
    con = singularity_constants(ReducedParams(2.0, 0.5))
    assert con.K1 == pytest.approx(11.0)
    assert con.K2 == pytest.approx(4.0)
    assert con.alpha == pytest.approx(2.0 - 1.0 / 3.0)
    assert con.beta == pytest.approx(math.sqrt(20.0))
    assert con.beta > 0.0


def test_special_solution_not_applicable():
    assert special_solution(ReducedParams(2.0, 0.5)) is None


@pytest.mark.parametrize("a,b", [(0.3, 0.3), (1.0, 1.5)])
def test_special_solution_exact(a, b):
    # first pair has 6a+4b=3 (K1=0), second has 6a+2b=9 (K2=0)
    con = singularity_constants(ReducedParams(a, b))
    assert min(abs(con.K1), abs(con.K2)) < 1e-12
    sol = special_solution(ReducedParams(a, b))
    assert sol is not None
    xs = np.geomspace(1e-6, 1.0, 2000)
    assert np.max(np.abs(sol.residual(xs))) < 1e-10


def test_special_solution_terminates_recursion():
    # with K2 = 0 the recursion's higher coefficients all vanish
    exp = series_coefficients(ReducedParams(1.0, 1.5), 6)
    sol = special_solution(ReducedParams(1.0, 1.5))
    assert exp.coeffs[1] == pytest.approx(sol.k2, rel=1e-14)
    assert all(abs(k) < 1e-12 for k in exp.coeffs[2:])


def test_optimal_truncation():
    exp = series_coefficients(ReducedParams(2.0, 0.5), 6)
    assert optimal_truncation(exp, 1e-10) == 6  # terms still decreasing
    # independent scan at a crossover-scale x
    for x in (0.3, 1.0, 3.0):
        mags = [abs(k) * x ** (1 + i / 2) for i, k in enumerate(exp.coeffs, start=1)]
        assert optimal_truncation(exp, x) == int(np.argmin(mags)) + 1
    exp1 = series_coefficients(ReducedParams(2.0, 0.5), 1)
    assert optimal_truncation(exp1, 0.5) == 1
    with pytest.raises(ValidationError):
        optimal_truncation(exp, 0.0)
