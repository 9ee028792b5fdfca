import itertools

import pytest
from hypothesis import given, settings, strategies as st

from elasticqmc.qmc.gfpoly import (PRIMITIVE_GF2, GFPoly, int_to_poly, is_prime, poly_to_int,
                                   prime_factors, primitive_modulus)


def polys(b, max_deg=6):
    return st.lists(st.integers(0, b - 1), max_size=max_deg + 1).map(lambda c: GFPoly(tuple(c), b))


bases = st.sampled_from([2, 3, 5])


def test_int_to_poly_examples():
    assert int_to_poly(0).is_zero()
    assert int_to_poly(5, 2) == GFPoly.from_exponents([0, 2])
    assert int_to_poly(7, 3) == GFPoly((1, 2), 3)
    with pytest.raises(ValueError):
        int_to_poly(8, 2, m=3)
    with pytest.raises(ValueError):
        int_to_poly(-1)


@given(st.integers(0, 10 ** 6), bases)
def test_int_poly_round_trip(n, b):
    assert poly_to_int(int_to_poly(n, b)) == n


@given(bases.flatmap(lambda b: st.tuples(polys(b), polys(b), polys(b))))
@settings(max_examples=80)
def test_ring_axioms(t):
    a, c, d = t
    assert (a + c) * d == a * d + c * d
    assert a * c == c * a
    assert (a - a).is_zero()
    assert (a + c) - c == a


@given(bases.flatmap(lambda b: st.tuples(polys(b), polys(b))))
@settings(max_examples=80)
def test_division_identity(t):
    a, d = t
    if d.is_zero():
        with pytest.raises(ZeroDivisionError):
            divmod(a, d)
        return
    q, r = divmod(a, d)
    assert q * d + r == a
    assert r.degree < d.degree


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        GFPoly((1,), 4)
    with pytest.raises(ValueError):
        GFPoly((2,), 2)
    with pytest.raises(TypeError):
        GFPoly((1,), 2) + GFPoly((1,), 3)


def brute_irreducible(p):
    # no monic factor of degree 1..deg/2
    b, d = p.b, p.degree
    for k in range(1, d // 2 + 1):
        for tail in itertools.product(range(b), repeat=k):
            f = GFPoly(tail + (1,), b)
            if (p % f).is_zero():
                return False
    return d >= 1


@pytest.mark.parametrize("b, maxdeg", [(2, 8), (3, 4)])
def test_irreducibility_matches_brute_force(b, maxdeg):
    for n in range(b, b ** (maxdeg + 1)):
        p = int_to_poly(n, b)
        assert p.is_irreducible() == brute_irreducible(p), p


def test_primitive_table():
    for m, exps in PRIMITIVE_GF2.items():
        P = GFPoly.from_exponents(exps)
        assert P.degree == m
        assert P.is_primitive(), m
    # lexicographically smallest primitive polynomial, checked by search
    for m in range(2, 11):
        first = next(k for k in range(2 ** m, 2 ** (m + 1)) if int_to_poly(k).is_primitive())
        assert primitive_modulus(m).to_int() == first


def test_primitive_modulus_other_base():
    P = primitive_modulus(3, 3)
    assert P.degree == 3 and P.is_primitive()
    with pytest.raises(ValueError):
        primitive_modulus(0)


def test_primes():
    assert [n for n in range(20) if is_prime(n)] == [2, 3, 5, 7, 11, 13, 17, 19]
    assert prime_factors(2 ** 32 - 1) == [3, 5, 17, 257, 65537]
    assert prime_factors(97) == [97]


def test_gcd_and_powmod():
    P = primitive_modulus(5)
    x = GFPoly.monomial(1)
    assert x.powmod(31, P) == GFPoly((1,))
    a = GFPoly.from_exponents([0, 1]) * GFPoly.from_exponents([0, 2, 3])
    assert a.gcd(GFPoly.from_exponents([0, 1]) * GFPoly.from_exponents([1])) == GFPoly.from_exponents([0, 1])
    assert "x^3" in repr(GFPoly.from_exponents([0, 3]))
