"""Polynomial lattice point sets and digit interlacing.

Point ``n`` of a classical polynomial lattice rule has components
``v_m(n(x) g_j(x) / P(x))``, where ``n(x)`` carries the base-b digits of
``n`` and ``v_m`` keeps the first ``m`` Laurent digits in ``x^{-1}``.  The
map ``n -> component`` is linear over Z_b, so each component is generated
from an ``m x m`` Hankel matrix of Laurent digits of ``g_j / P``.

Interlacing of order ``alpha`` merges ``alpha`` consecutive coordinates into
one: digit ``i`` of coordinate ``j`` lands at position ``j + (i - 1) alpha``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .gfpoly import GFPoly

__all__ = [
    "MAX_EXACT_BITS",
    "GeneratingVector",
    "PointSet",
    "laurent_digits",
    "vm_map",
    "generator_columns",
    "classical_digits",
    "classical_points",
    "interlace",
    "deinterlace",
    "interlace_digits",
    "generate_points",
    "importance_order",
]

MAX_EXACT_BITS = 53  # float64 mantissa


def _fits_double(b: int, digits: int) -> bool:
    return b ** digits <= 2 ** MAX_EXACT_BITS


def laurent_digits(numerator: GFPoly, denominator: GFPoly, count: int) -> list[int]:
    """Coefficients ``t_1..t_count`` of ``x^{-1}..x^{-count}`` in num/den."""
    if denominator.is_zero():
        raise ZeroDivisionError("Laurent expansion with zero denominator")
    b = denominator.b
    d = denominator.degree
    inv = pow(denominator.lead(), b - 2, b)
    r = list((numerator % denominator).coeffs) + [0] * (d + 1)
    r = r[:d + 1]
    den = denominator.coeffs
    out = []
    for _ in range(count):
        # r <- x * r, then peel off the x^d coefficient
        r = [0] + r[:d]
        t = (r[d] * inv) % b
        out.append(t)
        if t:
            for i in range(d + 1):
                r[i] = (r[i] - t * den[i]) % b
    return out


def vm_map(numerator: GFPoly, denominator: GFPoly, m: int) -> float:
    """``sum_{l=1}^m t_l b^{-l}`` for the Laurent digits of num/den."""
    b = denominator.b
    t = laurent_digits(numerator, denominator, m)
    k = 0
    for digit in t:
        k = k * b + digit
    return k / b ** m


@dataclass(frozen=True)
class GeneratingVector:
    """Modulus and generating polynomials of a (possibly interlaced) rule.

    ``polys`` holds ``alpha * s_target`` polynomials; coordinate ``j`` of the
    interlaced rule is built from polys ``(j-1) alpha .. j alpha - 1``.
    """

    b: int
    m: int
    alpha: int
    polys: tuple[GFPoly, ...]
    modulus: GFPoly

    def __post_init__(self):
        object.__setattr__(self, "polys", tuple(self.polys))
        if self.m < 0:
            raise ValueError("precision m must be non-negative")
        if self.alpha < 1:
            raise ValueError("interlacing order must be at least 1")
        if self.modulus.b != self.b or any(g.b != self.b for g in self.polys):
            raise ValueError("all polynomials must be over Z_b")
        if self.m > 0:
            if self.modulus.degree != self.m:
                raise ValueError(f"modulus has degree {self.modulus.degree}, expected m={self.m}")
            if not self.modulus.is_irreducible():
                raise ValueError(f"modulus {self.modulus} is reducible")
        for j, g in enumerate(self.polys):
            if g.degree >= max(self.m, 1):
                raise ValueError(f"generating polynomial {j} has degree {g.degree} >= m={self.m}")
        if len(self.polys) % self.alpha:
            raise ValueError(f"{len(self.polys)} polynomials do not split into blocks of alpha={self.alpha}")
        if self.alpha > 1 and not _fits_double(self.b, self.alpha * self.m):
            raise ValueError(f"alpha*m = {self.alpha * self.m} digits exceed double precision")

    @property
    def s_interlaced(self) -> int:
        """Number of classical components before interlacing."""
        return len(self.polys)

    @property
    def s_target(self) -> int:
        return len(self.polys) // self.alpha

    @property
    def n_points(self) -> int:
        return self.b ** self.m

    def truncated(self, s_target: int) -> "GeneratingVector":
        if s_target > self.s_target:
            raise ValueError(f"vector has only {self.s_target} coordinates")
        return GeneratingVector(self.b, self.m, self.alpha,
                                self.polys[:self.alpha * s_target], self.modulus)


@dataclass(frozen=True)
class PointSet:
    """``N x s`` quadrature nodes in [0, 1)^s.

    ``kind`` is "classical" or "interlaced"; ``digits`` is the number of
    base-b digits each coordinate carries.
    """

    points: np.ndarray = field(repr=False)
    kind: str
    alpha: int
    b: int
    m: int
    digits: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ValueError("points must be a 2-d array")
        if pts.size and (pts.min() < 0.0 or pts.max() >= 1.0):
            raise ValueError("points must lie in [0, 1)")
        if self.kind not in ("classical", "interlaced"):
            raise ValueError(f"unknown point-set kind {self.kind!r}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def integrate(self, values: np.ndarray) -> float:
        """Equal-weight average of integrand samples."""
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.n_points:
            raise ValueError("one sample per point required")
        return float(values.sum() / self.n_points)


def generator_columns(g: GFPoly, modulus: GFPoly, m: int) -> np.ndarray:
    """Integer images of the unit vectors ``n = b^i``, ``i = 0..m-1``.

    Column ``i`` has base-b digits ``t_{1+i}, ..., t_{m+i}`` (most significant
    first), i.e. the i-th column of the Hankel generating matrix.
    """
    b = modulus.b
    t = laurent_digits(g, modulus, 2 * m - 1) if m else []
    cols = np.zeros(m, dtype=np.int64)
    for i in range(m):
        k = 0
        for ell in range(m):
            k = k * b + t[ell + i]
        cols[i] = k
    return cols


def _span(cols: np.ndarray, b: int, m: int) -> np.ndarray:
    """Images of all ``n < b^m`` under the linear map with the given columns."""
    N = b ** m
    out = np.zeros(N, dtype=np.int64)
    if b == 2:
        for i in range(m):
            out[1 << i: 2 << i] = out[: 1 << i] ^ cols[i]
        return out
    # digitwise addition mod b on digit arrays
    weights = b ** np.arange(m - 1, -1, -1, dtype=np.int64)
    col_digits = (cols[:, None] // weights[None, :]) % b
    dig = np.zeros((N, m), dtype=np.int64)
    for i in range(m):
        block = b ** i
        for k in range(1, b):
            dig[k * block:(k + 1) * block] = (dig[:block] + k * col_digits[i]) % b
    return dig @ weights


def classical_digits(gv: GeneratingVector) -> np.ndarray:
    """``(N, alpha * s_target)`` integers ``b^m * v_m(n g_j / P)``."""
    out = np.empty((gv.n_points, gv.s_interlaced), dtype=np.int64)
    for j, g in enumerate(gv.polys):
        out[:, j] = _span(generator_columns(g, gv.modulus, gv.m), gv.b, gv.m)
    return out


def classical_points(gv: GeneratingVector) -> PointSet:
    """All ``b^m`` points of the classical rule in ``alpha * s_target`` dims."""
    pts = classical_digits(gv).astype(float) / float(gv.b ** gv.m)
    return PointSet(pts, "classical", 1, gv.b, gv.m, gv.m)


def interlace_digits(ints: np.ndarray, alpha: int, b: int, m: int) -> np.ndarray:
    """Interlace integer digit vectors: ``(N, alpha s) -> (N, s)``.

    Inputs are ``m``-digit integers; outputs carry ``alpha m`` digits.
    """
    ints = np.asarray(ints, dtype=np.int64)
    N, d = ints.shape
    if d % alpha:
        raise ValueError(f"dimension {d} is not divisible by alpha={alpha}")
    if not _fits_double(b, alpha * m):
        raise ValueError(f"alpha*m = {alpha * m} digits exceed double precision")
    s = d // alpha
    out = np.zeros((N, s), dtype=np.int64)
    total = alpha * m
    for i in range(1, m + 1):
        for j in range(1, alpha + 1):
            digit = (ints[:, j - 1::alpha] // b ** (m - i)) % b
            out += digit * b ** (total - (j + (i - 1) * alpha))
    return out


def interlace(points, alpha: int, m: Optional[int] = None) -> PointSet:
    """Digit interlacing of order ``alpha``.

    Parameters
    ----------
    points : PointSet or ndarray
        ``N x (alpha s)`` points in [0, 1).
    alpha : int
    m : int, optional
        Digits kept per input coordinate; read from the PointSet by default.
        Inputs are truncated to their first ``m`` digits.

    Returns
    -------
    PointSet
        ``N x s`` points with ``alpha m`` digits each.
    """
    b = 2
    if isinstance(points, PointSet):
        b = points.b
        m = points.digits if m is None else m
        arr = points.points
    else:
        arr = np.asarray(points, dtype=float)
        if m is None:
            raise ValueError("digit count m is required for raw arrays")
    if alpha < 1:
        raise ValueError("interlacing order must be at least 1")
    if arr.ndim != 2 or arr.shape[1] % alpha:
        raise ValueError(f"input dimension {arr.shape[-1]} is not divisible by alpha={alpha}")
    if arr.size and (arr.min() < 0.0 or arr.max() >= 1.0):
        raise ValueError("points must lie in [0, 1)")
    if not _fits_double(b, m):
        raise ValueError(f"{m} input digits exceed double precision")
    ints = np.floor(arr * float(b ** m)).astype(np.int64)
    out = interlace_digits(ints, alpha, b, m).astype(float) / float(b ** (alpha * m))
    return PointSet(out, "interlaced", alpha, b, m, alpha * m)


def deinterlace(points: PointSet, alpha: int) -> PointSet:
    """Inverse of :func:`interlace`: ``(N, s) -> (N, alpha s)``."""
    b, total = points.b, points.digits
    if total % alpha:
        raise ValueError(f"{total} digits do not split into alpha={alpha} streams")
    m = total // alpha
    ints = np.floor(points.points * float(b ** total)).astype(np.int64)
    N, s = ints.shape
    out = np.zeros((N, alpha * s), dtype=np.int64)
    for i in range(1, m + 1):
        for j in range(1, alpha + 1):
            digit = (ints // b ** (total - (j + (i - 1) * alpha))) % b
            out[:, j - 1::alpha] += digit * b ** (m - i)
    return PointSet(out.astype(float) / float(b ** m), "classical", 1, b, m, m)


def generate_points(gv: GeneratingVector) -> PointSet:
    """Points of the rule: classical for ``alpha = 1``, interlaced otherwise."""
    if gv.alpha == 1:
        return classical_points(gv)
    ints = interlace_digits(classical_digits(gv), gv.alpha, gv.b, gv.m)
    pts = ints.astype(float) / float(gv.b ** (gv.alpha * gv.m))
    return PointSet(pts, "interlaced", gv.alpha, gv.b, gv.m, gv.alpha * gv.m)


def importance_order(b_tilde: Sequence[float], b_hat: Sequence[float]) -> np.ndarray:
    """Order of the ``s1 + s2`` components of ``[y | z]`` by decreasing weight.

    ``order[c]`` is the index in ``[y | z]`` fed by rule coordinate ``c``.
    Ties keep ``y_j`` ahead of ``z_j`` (stable sort), so equal sequences
    interleave as ``y_1, z_1, y_2, z_2, ...``.
    """
    w = np.concatenate([np.asarray(b_tilde, float), np.asarray(b_hat, float)])
    return np.argsort(-w, kind="stable")
