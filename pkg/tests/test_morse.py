import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geodlab.errors import InputError
from geodlab.morse import (
    MorseCheckInput,
    RATIONAL,
    TypeNumberQuery,
    canonical_space,
    greatest_divisor_coprime_to,
    iterate_parity_check,
    morse_check,
    poincare_series,
    type_numbers,
)


# ---------------------------------------------------------------------------
# type numbers


def divisors(s):
    return [d for d in range(1, s + 1) if s % d == 0]


def test_worked_case_s1():
    t = type_numbers(TypeNumberQuery(s=1, p=RATIONAL, index_fn={1: 1}))
    assert t.entries == {1: 1}
    t = type_numbers(TypeNumberQuery(s=1, p=5, index_fn={1: 1}))
    assert t.entries == {1: 1} and t.coefficients == "Z5"


def test_worked_case_s2_even_difference():
    fn = {1: 1, 2: 3}
    assert type_numbers(TypeNumberQuery(s=2, p=RATIONAL, index_fn=fn)).entries == {3: 1}
    assert type_numbers(TypeNumberQuery(s=2, p=2, index_fn=fn)).entries == {3: 1}


def test_worked_case_s2_odd_difference():
    fn = {1: 1, 2: 2}
    assert type_numbers(TypeNumberQuery(s=2, p=RATIONAL, index_fn=fn)).entries == {}
    assert type_numbers(TypeNumberQuery(s=2, p=3, index_fn=fn)).entries == {}
    assert type_numbers(TypeNumberQuery(s=2, p=2, index_fn=fn)).entries == {}


def test_missing_divisor_is_reported():
    with pytest.raises(InputError, match="divisor 2"):
        type_numbers(TypeNumberQuery(s=2, p=RATIONAL, index_fn={1: 1}))


def test_d_p_by_enumeration():
    for s in range(1, 40):
        for p in (2, 3, 5, 7):
            expected = max(d for d in divisors(s) if d % p != 0)
            assert greatest_divisor_coprime_to(s, p) == expected


def test_window_totals_against_brute_force():
    # independent route: enumerate the window sum over all degrees and
    # compare with the closed-form count max(0, i(s) - i(d_p) - 1)
    rng = np.random.default_rng(0)
    for s in range(2, 13):
        for p in (2, 3, 5, 7):
            for _ in range(40):
                fn = {d: int(rng.integers(0, 11)) for d in divisors(s)}
                q = TypeNumberQuery(s=s, p=p, index_fn=fn)
                table = type_numbers(q)
                case_b = s % 2 == 0 and (fn[2] - fn[1]) % 2 == 1
                if case_b and p != 2:
                    assert table.total() == 0
                    continue
                d_p = q.d_p
                lo, hi = fn[d_p] + 2, fn[s]
                brute = sum(1 for k in range(0, 200) if lo <= k <= hi)
                assert table.total() == brute == max(0, fn[s] - fn[d_p] - 1)
                assert all(lo <= k <= hi for k in table.support())
                # rational table alongside
                qr = TypeNumberQuery(s=s, p=RATIONAL, index_fn=fn)
                tr = type_numbers(qr)
                assert tr.total() == (0 if case_b else 1)
                if not case_b:
                    assert tr.support() == [fn[s]]


@settings(max_examples=150, deadline=None)
@given(s=st.integers(1, 16), p=st.sampled_from([2, 3, 5, 7, 11]),
       data=st.data())
def test_table_values_are_flags(s, p, data):
    fn = {d: data.draw(st.integers(0, 12)) for d in divisors(s)}
    table = type_numbers(TypeNumberQuery(s=s, p=p, index_fn=fn))
    assert set(table.entries.values()) <= {1}
    assert all(k >= 0 for k in table.entries)


def test_parity_sphere_profile():
    assert iterate_parity_check([2 * n - 1 for n in range(1, 7)]).passed


def test_parity_vacuous_case():
    assert iterate_parity_check(list(range(1, 7))).passed


def test_parity_hyperbolic_profiles():
    # linear profiles i(n) = c n: rational tables vanish for odd c at even
    # iterates, match parity otherwise; brute force over small c
    for c in (0, 1, 2, 3):
        verdict = iterate_parity_check([c * n for n in range(1, 7)])
        assert verdict.passed


def test_parity_reports_offender():
    # a profile that is not realizable by any circle function: i(1) = 0 but
    # i(2) = 3 with even difference forced off-parity
    verdict = iterate_parity_check([0, 2, 5])
    assert not verdict.passed
    assert (3, 5) in verdict.failures


# ---------------------------------------------------------------------------
# series


def poly_mul(a, b, K):
    out = [0] * (K + 1)
    for i, ai in enumerate(a):
        if ai == 0 or i > K:
            continue
        for j, bj in enumerate(b):
            if i + j > K:
                break
            out[i + j] += ai * bj
    return out


def longdiv(num, den, K):
    # coefficients of num/den with den[0] == 1, exact integer arithmetic
    c = []
    for k in range(K + 1):
        v = num[k] if k < len(num) else 0
        for j in range(max(0, k - len(den) + 1), k):
            v -= c[j] * den[k - j]
        c.append(v)
    return c


def one_minus_t(b, K):
    den = [0] * (K + 1)
    den[0] = 1
    if b <= K:
        den[b] = -1
    return den


def oracle_relative(space, n, K):
    # assemble the closed-form rational function over a common denominator
    # and long-divide: a genuinely different route from the geometric sums
    if space == "omega_plus_rel_M":
        if n % 2 == 0:
            a1, b1, a2, b2 = n - 1, 2, 3 * n - 3, 2 * n - 2
        else:
            a1, b1, a2, b2 = n - 1, 2, 2 * n - 2, n - 1
    else:
        if n % 2 == 0:
            a1, b1, a2, b2 = n + 1, 4, 3 * n - 3, 4 * n - 4
        else:
            a1, b1, a2, b2 = n + 1, 4, 2 * n - 2, 2 * n - 2
    t_a1 = [0] * a1 + [1]
    t_a2 = [0] * a2 + [1]
    num = [x + y for x, y in zip(poly_mul(t_a1, one_minus_t(b2, K), K),
                                 poly_mul(t_a2, one_minus_t(b1, K), K))]
    den = poly_mul(one_minus_t(b1, K), one_minus_t(b2, K), K)
    return longdiv(num, den, K)


@pytest.mark.parametrize("space", ["omega_plus_rel_M", "omega_rel_M"])
@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_series_match_long_division_oracle(space, n, K=12):
    got = list(poincare_series(space, n, K).coefficients)
    assert got == oracle_relative(space, n, K)


def test_series_worked_examples():
    assert list(poincare_series("omega+rel", 2, 6).coefficients) == [0, 1, 0, 2, 0, 2, 0]
    assert list(poincare_series("omega_plus_rel_M", 3, 7).coefficients) == [0, 0, 1, 0, 2, 0, 2, 0]
    assert list(poincare_series("omega+abs", 2, 3).coefficients) == [1, 1, 0, 1]


def test_absolute_series_nonnegative():
    for n in range(2, 9):
        for space in ("omega_plus_abs", "omega_abs"):
            e = poincare_series(space, n, 50)
            assert all(c >= 0 for c in e.coefficients)


def test_series_validation():
    with pytest.raises(InputError):
        poincare_series("omega+rel", 1, 5)
    with pytest.raises(InputError):
        poincare_series("nonsense", 2, 5)
    with pytest.raises(InputError):
        poincare_series("omega+rel", 2, -1)
    assert canonical_space("omega-rel") == "omega_rel_M"


# ---------------------------------------------------------------------------
# inequalities


def test_morse_check_equal_lists_pass():
    v = morse_check(MorseCheckInput((1, 2, 0, 3), (1, 2, 0, 3)))
    assert v.passed and all(v.per_k_dominance)


def test_morse_check_cancelling_pair():
    v = morse_check(MorseCheckInput((1, 1, 1), (1, 0, 0), r_star=2))
    assert v.passed


def test_morse_check_violation_at_rank_zero():
    v = morse_check(MorseCheckInput((0, 0), (1, 0)))
    assert not v.passed
    assert v.failed_rank == 0 and v.failed_kind == "inequality"
    assert v.per_k_dominance[0] is False


def test_morse_check_equality_enforced_from_r_star():
    # strict surplus satisfies the inequality but violates stable equality
    v = morse_check(MorseCheckInput((2, 0), (1, 0), r_star=0))
    assert not v.passed
    assert v.failed_rank == 0 and v.failed_kind == "equality"
    # the same data with the equality demanded only later is fine at rank 0
    # but fails the r = 1 inequality chain member
    v2 = morse_check(MorseCheckInput((2, 0), (1, 0), r_star=1))
    assert not v2.passed and v2.failed_kind == "inequality"


def test_morse_check_on_series_data():
    B = poincare_series("omega_rel_M", 2, 9).coefficients
    assert morse_check(MorseCheckInput(B, B)).passed


@settings(max_examples=100, deadline=None)
@given(data=st.data())
def test_cancelling_pair_robustness(data):
    # start from M = B (passes with equalities), bump a consecutive pair
    # below r_star: the verdict must stay green
    R = data.draw(st.integers(3, 8))
    B = tuple(data.draw(st.integers(0, 5)) for _ in range(R + 1))
    j = data.draw(st.integers(0, R - 2))
    M = list(B)
    M[j] += 1
    M[j + 1] += 1
    v = morse_check(MorseCheckInput(tuple(M), B, r_star=R))
    assert v.passed, (M, B, j)


def test_morse_check_validation():
    with pytest.raises(InputError):
        morse_check(MorseCheckInput((1, 2), (1,)))
    with pytest.raises(InputError):
        morse_check(MorseCheckInput((1, -1), (1, 0)))
    with pytest.raises(InputError):
        morse_check(MorseCheckInput((1, 0), (1, 0), r_star=5))
