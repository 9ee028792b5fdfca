"""Polynomials over the prime field Z_b.

Coefficients are stored little-endian, so ``coeffs[i]`` multiplies ``x^i``.
A polynomial of degree < m is identified with the integer whose base-b
digits are its coefficients; for b = 2 this is the usual bit-vector encoding
and the hot loops below work on plain Python ints.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

__all__ = [
    "GFPoly",
    "int_to_poly",
    "poly_to_int",
    "is_prime",
    "prime_factors",
    "primitive_modulus",
    "PRIMITIVE_GF2",
]

# Lexicographically smallest primitive polynomial of each degree over GF(2),
# as exponent lists.  Primitive implies irreducible.
PRIMITIVE_GF2: dict[int, tuple[int, ...]] = {
    1: (0, 1), 2: (0, 1, 2), 3: (0, 1, 3), 4: (0, 1, 4), 5: (0, 2, 5),
    6: (0, 1, 6), 7: (0, 1, 7), 8: (0, 2, 3, 4, 8), 9: (0, 4, 9), 10: (0, 3, 10),
    11: (0, 2, 11), 12: (0, 1, 4, 6, 12), 13: (0, 1, 3, 4, 13), 14: (0, 1, 3, 5, 14),
    15: (0, 1, 15), 16: (0, 2, 3, 5, 16), 17: (0, 3, 17), 18: (0, 1, 2, 5, 18),
    19: (0, 1, 2, 5, 19), 20: (0, 3, 20), 21: (0, 2, 21), 22: (0, 1, 22),
    23: (0, 5, 23), 24: (0, 1, 3, 4, 24), 25: (0, 3, 25), 26: (0, 1, 2, 6, 26),
    27: (0, 1, 2, 5, 27), 28: (0, 3, 28), 29: (0, 2, 29), 30: (0, 1, 4, 6, 30),
    31: (0, 3, 31), 32: (0, 1, 2, 3, 5, 7, 32),
}


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def prime_factors(n: int) -> list[int]:
    """Distinct prime factors of ``n`` by trial division."""
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out.append(n)
    return out


def _strip(c: Sequence[int]) -> tuple[int, ...]:
    c = list(c)
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


@dataclass(frozen=True)
class GFPoly:
    """Polynomial over Z_b with little-endian coefficients.

    The zero polynomial has ``coeffs == ()`` and degree -1.
    """

    coeffs: tuple[int, ...]
    b: int = 2

    def __post_init__(self):
        if not is_prime(self.b):
            raise ValueError(f"base must be prime, got {self.b}")
        c = _strip(int(a) for a in self.coeffs)
        if any(a < 0 or a >= self.b for a in c):
            raise ValueError(f"coefficients must lie in [0, {self.b})")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_exponents(cls, exps: Iterable[int], b: int = 2) -> "GFPoly":
        exps = list(exps)
        c = [0] * (max(exps) + 1 if exps else 0)
        for e in exps:
            c[e] = (c[e] + 1) % b
        return cls(tuple(c), b)

    @classmethod
    def monomial(cls, k: int, b: int = 2) -> "GFPoly":
        return cls((0,) * k + (1,), b)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def lead(self) -> int:
        return self.coeffs[-1] if self.coeffs else 0

    def __repr__(self) -> str:
        if not self.coeffs:
            return f"GFPoly(0, b={self.b})"
        terms = []
        for i in range(self.degree, -1, -1):
            a = self.coeffs[i]
            if a:
                mono = "1" if i == 0 else ("x" if i == 1 else f"x^{i}")
                terms.append(mono if a == 1 else f"{a}*{mono}" if i else str(a))
        return f"GFPoly({' + '.join(terms)}, b={self.b})"

    def _check(self, other: "GFPoly") -> None:
        if not isinstance(other, GFPoly) or other.b != self.b:
            raise TypeError("operands must be polynomials over the same field")

    def __add__(self, other: "GFPoly") -> "GFPoly":
        self._check(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (0,) * (n - len(self.coeffs))
        c = other.coeffs + (0,) * (n - len(other.coeffs))
        return GFPoly(tuple((x + y) % self.b for x, y in zip(a, c)), self.b)

    def __neg__(self) -> "GFPoly":
        return GFPoly(tuple((-a) % self.b for a in self.coeffs), self.b)

    def __sub__(self, other: "GFPoly") -> "GFPoly":
        return self + (-other)

    def scale(self, k: int) -> "GFPoly":
        return GFPoly(tuple((k * a) % self.b for a in self.coeffs), self.b)

    def shift(self, k: int) -> "GFPoly":
        """Multiply by ``x^k``."""
        return GFPoly((0,) * k + self.coeffs, self.b) if self.coeffs else self

    def __mul__(self, other: "GFPoly") -> "GFPoly":
        self._check(other)
        if self.is_zero() or other.is_zero():
            return GFPoly((), self.b)
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, c in enumerate(other.coeffs):
                    out[i + j] = (out[i + j] + a * c) % self.b
        return GFPoly(tuple(out), self.b)

    def __divmod__(self, other: "GFPoly") -> tuple["GFPoly", "GFPoly"]:
        self._check(other)
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        b = self.b
        inv = pow(other.lead(), b - 2, b)
        r = list(self.coeffs)
        dq = len(r) - len(other.coeffs)
        if dq < 0:
            return GFPoly((), b), self
        q = [0] * (dq + 1)
        d = other.degree
        for k in range(dq, -1, -1):
            t = (r[k + d] * inv) % b
            q[k] = t
            if t:
                for i, c in enumerate(other.coeffs):
                    r[k + i] = (r[k + i] - t * c) % b
        return GFPoly(tuple(q), b), GFPoly(tuple(r[:d]), b)

    def __floordiv__(self, other: "GFPoly") -> "GFPoly":
        return divmod(self, other)[0]

    def __mod__(self, other: "GFPoly") -> "GFPoly":
        return divmod(self, other)[1]

    def monic(self) -> "GFPoly":
        if self.is_zero():
            return self
        return self.scale(pow(self.lead(), self.b - 2, self.b))

    def gcd(self, other: "GFPoly") -> "GFPoly":
        a, c = self, other
        while not c.is_zero():
            a, c = c, a % c
        return a.monic()

    def powmod(self, e: int, mod: "GFPoly") -> "GFPoly":
        result = GFPoly((1,), self.b) % mod
        base = self % mod
        while e:
            if e & 1:
                result = (result * base) % mod
            base = (base * base) % mod
            e >>= 1
        return result

    def is_irreducible(self) -> bool:
        """Ben-Or test: ``gcd(x^(b^i) - x, P) = 1`` for ``i <= deg/2``."""
        d = self.degree
        if d < 1:
            return False
        if d == 1:
            return True
        x = GFPoly.monomial(1, self.b)
        xp = x
        for _ in range(d // 2):
            xp = xp.powmod(self.b, self)
            if self.gcd(xp - x).degree > 0:
                return False
        return True

    def is_primitive(self) -> bool:
        """True if ``x`` generates the multiplicative group mod this polynomial."""
        if not self.is_irreducible() or self.coeffs[0] == 0:
            return False
        order = self.b ** self.degree - 1
        x = GFPoly.monomial(1, self.b)
        one = GFPoly((1,), self.b)
        if x.powmod(order, self) != one:
            return False
        return all(x.powmod(order // q, self) != one for q in prime_factors(order))

    def to_int(self) -> int:
        return poly_to_int(self)


def int_to_poly(n: int, b: int = 2, m: int | None = None) -> GFPoly:
    """Polynomial whose coefficients are the base-b digits of ``n``.

    With ``m`` given, ``n`` must satisfy ``0 <= n < b^m``.
    """
    n = int(n)
    if n < 0 or (m is not None and n >= b ** m):
        bound = "" if m is None else f" < {b}^{m}"
        raise ValueError(f"n={n} out of range 0 <= n{bound}")
    digits = []
    while n:
        n, r = divmod(n, b)
        digits.append(r)
    return GFPoly(tuple(digits), b)


def poly_to_int(p: GFPoly) -> int:
    n = 0
    for a in reversed(p.coeffs):
        n = n * p.b + a
    return n


@lru_cache(maxsize=None)
def primitive_modulus(m: int, b: int = 2) -> GFPoly:
    """A primitive (hence irreducible) polynomial of degree ``m`` over Z_b."""
    if m < 1:
        raise ValueError("modulus degree must be at least 1")
    if b == 2 and m in PRIMITIVE_GF2:
        return GFPoly.from_exponents(PRIMITIVE_GF2[m], 2)
    if b ** m > 2 ** 24:
        raise ValueError(f"no tabulated primitive modulus for b={b}, m={m}")
    for k in range(b ** m, 2 * b ** m):
        p = int_to_poly(k, b)
        if p.lead() == 1 and p.is_primitive():
            return p
    raise ValueError(f"no primitive polynomial of degree {m} over Z_{b}")  # unreachable
