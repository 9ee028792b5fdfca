"""Plain-text generating-vector files.

Layout::

    b m alpha s
    <digits of g_1>
    ...
    <digits of g_{alpha s}>
    <digits of P>

Digits are space-separated, little-endian (constant term first); the zero
polynomial is written as a single ``0``.
"""
from __future__ import annotations

import os
import tempfile
from pathlib import Path

from .gfpoly import GFPoly
from .lattice import GeneratingVector

__all__ = ["save_vector", "load_vector", "VectorFormatError", "format_vector", "parse_vector"]


class VectorFormatError(ValueError):
    """Malformed generating-vector file; the message names line and field."""


def _digits(p: GFPoly) -> str:
    return " ".join(str(a) for a in p.coeffs) if p.coeffs else "0"


def format_vector(gv: GeneratingVector) -> str:
    lines = [f"{gv.b} {gv.m} {gv.alpha} {gv.s_target}"]
    lines += [_digits(g) for g in gv.polys]
    lines.append(_digits(gv.modulus))
    return "\n".join(lines) + "\n"


def save_vector(gv: GeneratingVector, path) -> None:
    """Write atomically: a failed write leaves no partial file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=".gv-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(format_vector(gv))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_digits(text: str, b: int, lineno: int, what: str) -> GFPoly:
    try:
        digits = [int(tok) for tok in text.split()]
    except ValueError:
        raise VectorFormatError(f"line {lineno}: {what}: non-integer digit in {text.strip()!r}") from None
    if not digits:
        raise VectorFormatError(f"line {lineno}: {what}: empty digit list")
    bad = [d for d in digits if d < 0 or d >= b]
    if bad:
        raise VectorFormatError(f"line {lineno}: {what}: digit {bad[0]} outside [0, {b})")
    return GFPoly(tuple(digits), b)


def parse_vector(text: str) -> GeneratingVector:
    lines = [ln for ln in text.splitlines()]
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise VectorFormatError("line 1: header: file is empty")
    head = lines[0].split()
    names = ("b", "m", "alpha", "s")
    if len(head) != 4:
        raise VectorFormatError(f"line 1: header: expected 4 fields 'b m alpha s', got {len(head)}")
    vals = {}
    for name, tok in zip(names, head):
        try:
            vals[name] = int(tok)
        except ValueError:
            raise VectorFormatError(f"line 1: header field {name}: {tok!r} is not an integer") from None
    b, m, alpha, s = (vals[n] for n in names)
    if b < 2 or any(b % d == 0 for d in range(2, int(b ** 0.5) + 1)):
        raise VectorFormatError(f"line 1: header field b: {b} is not prime")
    for name in ("m", "alpha", "s"):
        if vals[name] < (0 if name == "m" else 1):
            raise VectorFormatError(f"line 1: header field {name}: {vals[name]} out of range")
    n_polys = alpha * s
    expected = 1 + n_polys + 1
    if len(lines) < expected:
        what = "modulus P" if len(lines) == expected - 1 else f"polynomial g_{len(lines)}"
        raise VectorFormatError(f"line {len(lines) + 1}: {what}: missing (header announces "
                                f"{n_polys} polynomials and a modulus)")
    if len(lines) > expected:
        raise VectorFormatError(f"line {expected + 1}: unexpected extra line after the modulus")
    polys = []
    for k in range(n_polys):
        lineno = k + 2
        g = _parse_digits(lines[k + 1], b, lineno, f"polynomial g_{k + 1}")
        if g.degree >= max(m, 1):
            raise VectorFormatError(f"line {lineno}: polynomial g_{k + 1}: degree {g.degree} >= m={m}")
        polys.append(g)
    lineno = n_polys + 2
    P = _parse_digits(lines[-1], b, lineno, "modulus P")
    if m > 0 and P.degree != m:
        raise VectorFormatError(f"line {lineno}: modulus P: degree {P.degree}, expected m={m}")
    if m > 0 and not P.is_irreducible():
        raise VectorFormatError(f"line {lineno}: modulus P: {P} is reducible")
    try:
        return GeneratingVector(b, m, alpha, tuple(polys), P)
    except ValueError as exc:
        raise VectorFormatError(f"line 1: header: {exc}") from None


def load_vector(path) -> GeneratingVector:
    return parse_vector(Path(path).read_text())
