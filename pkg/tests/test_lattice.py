from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from elasticqmc.qmc import (GeneratingVector, GFPoly, PointSet, classical_points, deinterlace,
                            generate_points, importance_order, int_to_poly, interlace,
                            laurent_digits, primitive_modulus, vm_map)
from elasticqmc.qmc.lattice import classical_digits, interlace_digits

RNG = np.random.default_rng(7)
X3 = GFPoly.from_exponents([0, 1, 3])  # x^3 + x + 1


def long_division_digits(num, den, count):
    """t_1..t_count from the polynomial quotient floor(num x^count / den)."""
    q = (num.shift(count)) // den
    c = list(q.coeffs) + [0] * (count + 1)
    # coefficient of x^(count - l) in q is t_l (the integer part of num/den is discarded)
    return [c[count - l] for l in range(1, count + 1)]


def vm_oracle(num, den, m):
    t = long_division_digits(num % den, den, m)
    return float(sum(Fraction(d, den.b ** (l + 1)) for l, d in enumerate(t)))


def random_irreducible(b, m, rng):
    while True:
        P = int_to_poly(int(rng.integers(b ** m, 2 * b ** m)), b) if b == 2 else \
            GFPoly(tuple(int(v) for v in rng.integers(0, b, m)) + (1,), b)
        if P.is_irreducible():
            return P


def test_vm_examples():
    assert vm_map(GFPoly(()), X3, 3) == 0.0
    assert vm_map(GFPoly((1,)), X3, 3) == 0.125
    assert vm_map(GFPoly.monomial(2), X3, 3) == 0.625
    with pytest.raises(ZeroDivisionError):
        vm_map(GFPoly((1,)), GFPoly(()), 3)


def test_vm_matches_long_division_on_random_triples():
    for _ in range(100):
        b = int(RNG.choice([2, 3]))
        m = int(RNG.integers(1, 9 if b == 2 else 6))
        P = random_irreducible(b, m, RNG)
        n = int_to_poly(int(RNG.integers(0, b ** m)), b)
        g = int_to_poly(int(RNG.integers(1, b ** m)), b)
        assert vm_map(n * g, P, m) == vm_oracle(n * g, P, m)
        assert laurent_digits(n * g, P, m + 3) == long_division_digits((n * g) % P, P, m + 3)


def naive_points(gv):
    """Point n, component j = v_m(n(x) g_j(x) / P(x)) evaluated one by one."""
    out = np.empty((gv.n_points, gv.s_interlaced))
    for n in range(gv.n_points):
        nx = int_to_poly(n, gv.b)
        for j, g in enumerate(gv.polys):
            out[n, j] = vm_map(nx * g, gv.modulus, gv.m)
    return out


@pytest.mark.parametrize("b, m, k", [(2, 5, 4), (2, 1, 2), (3, 3, 3), (5, 2, 2)])
def test_classical_points_match_pointwise_definition(b, m, k):
    P = random_irreducible(b, m, RNG)
    polys = tuple(int_to_poly(int(v), b) for v in RNG.integers(0, b ** m, k))
    gv = GeneratingVector(b, m, 1, polys, P)
    np.testing.assert_array_equal(classical_points(gv).points, naive_points(gv))


def test_classical_examples():
    gv = GeneratingVector(2, 3, 1, (GFPoly((1,)),), X3)
    pts = classical_points(gv).points
    assert sorted(pts[:, 0]) == [k / 8 for k in range(8)]
    assert not pts[0].any()
    gv = GeneratingVector(2, 2, 1, (GFPoly((1,)), GFPoly.monomial(1)), GFPoly.from_exponents([0, 1, 2]))
    pts = classical_points(gv).points
    assert pts.shape == (4, 2)
    for c in range(2):
        assert sorted(pts[:, c]) == [0, 0.25, 0.5, 0.75]


def test_projection_bijectivity_for_random_pairs():
    for _ in range(10):
        m = int(RNG.integers(2, 11))
        P = random_irreducible(2, m, RNG)
        g = int_to_poly(int(RNG.integers(1, 2 ** m)), 2)
        assert g.gcd(P) == GFPoly((1,))
        x = classical_digits(GeneratingVector(2, m, 1, (g,), P))[:, 0]
        np.testing.assert_array_equal(np.sort(x), np.arange(2 ** m))


def test_interlace_examples():
    assert interlace(np.array([[0.5, 0.5]]), 2, m=1).points[0, 0] == 0.75
    assert interlace(np.array([[0.75, 0.0]]), 2, m=2).points[0, 0] == 0.625
    x = RNG.integers(0, 2 ** 6, (5, 3)) / 2 ** 6
    np.testing.assert_array_equal(interlace(x, 1, m=6).points, x)
    with pytest.raises(ValueError):
        interlace(np.zeros((2, 3)), 2, m=4)


def formula_interlace(x, alpha, m, b=2):
    """Sum_i Sum_j xi_{j,i} b^{-j-(i-1)alpha} for one interlaced coordinate."""
    total = 0.0
    for j in range(1, alpha + 1):
        digits = [int(x[j - 1] * b ** i) % b for i in range(1, m + 1)]
        for i, d in enumerate(digits, start=1):
            total += d * b ** (-j - (i - 1) * alpha)
    return total


@given(st.integers(1, 4), st.integers(1, 10), st.integers(1, 3), st.integers(0, 2 ** 32))
@settings(max_examples=60, deadline=None)
def test_interlace_formula_and_round_trip(alpha, m, s, seed):
    rng = np.random.default_rng(seed)
    ints = rng.integers(0, 2 ** m, (6, alpha * s))
    x = ints / 2 ** m
    ps = PointSet(x, "classical", 1, 2, m, m)
    out = interlace(ps, alpha)
    assert out.digits == alpha * m
    assert np.all((out.points >= 0) & (out.points < 1))
    for r in range(6):
        for c in range(s):
            assert out.points[r, c] == formula_interlace(x[r, c * alpha:(c + 1) * alpha], alpha, m)
    np.testing.assert_array_equal(deinterlace(out, alpha).points, x)
    np.testing.assert_array_equal(interlace_digits(ints, alpha, 2, m),
                                  np.round(out.points * 2 ** (alpha * m)).astype(np.int64))


def test_generate_points_properties():
    P = primitive_modulus(6)
    polys = tuple(int_to_poly(int(v), 2) for v in RNG.integers(1, 64, 6))
    ps = generate_points(GeneratingVector(2, 6, 3, polys, P))
    assert ps.points.shape == (64, 2) and ps.kind == "interlaced"
    assert not ps.points[0].any()
    assert np.all((ps.points >= 0) & (ps.points < 1))
    assert ps.integrate(np.ones(64)) == 1.0
    assert not ps.points.flags.writeable
    with pytest.raises(ValueError):
        ps.integrate(np.ones(3))


def test_generating_vector_validation():
    one = GFPoly((1,))
    with pytest.raises(ValueError, match="reducible"):
        GeneratingVector(2, 2, 1, (one,), GFPoly.from_exponents([0, 2]))
    with pytest.raises(ValueError, match="degree"):
        GeneratingVector(2, 3, 1, (GFPoly.monomial(3),), X3)
    with pytest.raises(ValueError, match="blocks"):
        GeneratingVector(2, 3, 2, (one,) * 3, X3)
    with pytest.raises(ValueError, match="precision"):
        GeneratingVector(2, 20, 3, (one,) * 3, primitive_modulus(20))
    gv = GeneratingVector(2, 3, 2, (one,) * 6, X3)
    assert (gv.s_target, gv.s_interlaced, gv.n_points) == (3, 6, 8)
    assert gv.truncated(1).s_interlaced == 2


def test_importance_order_interleaves_ties():
    order = importance_order([1.0, 0.25], [1.0, 0.5])
    np.testing.assert_array_equal(order, [0, 2, 3, 1])
    np.testing.assert_array_equal(importance_order([1, 0.5, 0.2], [1, 0.5, 0.2]), [0, 3, 1, 4, 2, 5])
