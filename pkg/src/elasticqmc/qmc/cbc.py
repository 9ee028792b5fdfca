"""Component-by-component construction of interlaced polynomial lattice rules.

Criterion
---------
For an order-``alpha`` interlaced rule with classical digit vectors ``x_n``
(``alpha s`` components, ``m`` digits each) the worst-case error bound is

    E = sum_{v != {}} gamma_v (1/N) sum_n prod_{j in v} Phi_j(n),
    Phi_j(n) = prod_{i=1}^{alpha} (1 + b^{alpha-i} omega(x_{n,(j-1)alpha+i})) - 1,

with ``omega(x) = sum_{k>=1} b^{-alpha a(k)} wal_k(x)`` and ``a(k)`` the
position of the leading digit of ``k``.  It follows from bounding the
interlaced digit weight below by the leading digits of the ``alpha``
classical components, which contribute distinct positions.

Weights are product weights ``gamma_v = prod gamma_j`` or SPOD weights

    gamma_v = sum_{nu in {1..a}^|v|} |nu|! prod_{j in v} 2^{[nu_j = a]} beta_j^{nu_j}.

SPOD sums are accumulated by order ``l = |nu|``; each order row keeps its own
log scale, since ``|nu|!`` exceeds double range long before the dimensions
of interest are reached.  Only ratios of candidate scores matter for the
greedy choice, so the scaled arithmetic selects the same polynomials as an
exact evaluation would.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import fft as sfft
from scipy.special import gammaln, logsumexp

from .gfpoly import GFPoly, int_to_poly, poly_to_int, primitive_modulus
from .lattice import GeneratingVector, _span, classical_digits, generator_columns

__all__ = [
    "ProductWeights",
    "SPODWeights",
    "omega_table",
    "criterion",
    "cbc_construct",
    "CBCResult",
    "MAX_COMPONENTS",
    "SPOD_LEAD",
]

log = logging.getLogger(__name__)

MAX_COMPONENTS = 4096
# Leading SPOD weight after normalisation.  The bound's |nu|! factor makes
# interactions dominate once beta_1 is O(1), and CBC then favours repeated
# polynomials inside a block; 0.1 keeps order-two convergence on test
# integrands with j^-2 and j^-3 decay.
SPOD_LEAD = 0.1


@dataclass(frozen=True)
class ProductWeights:
    """``gamma_v = prod_{j in v} gamma_j``."""

    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim != 1 or np.any(g < 0.0) or not np.all(np.isfinite(g)):
            raise ValueError("product weights must be finite and non-negative")
        object.__setattr__(self, "gamma", g)

    def __len__(self) -> int:
        return self.gamma.size

    def subset_weight(self, v) -> float:
        return float(np.prod([self.gamma[j] for j in v]))


@dataclass(frozen=True)
class SPODWeights:
    """Smoothness-driven product-and-order-dependent weights of order ``alpha``."""

    beta: np.ndarray
    alpha: int

    def __post_init__(self):
        bt = np.asarray(self.beta, dtype=float)
        if bt.ndim != 1 or np.any(bt < 0.0) or not np.all(np.isfinite(bt)):
            raise ValueError("SPOD sequence must be finite and non-negative")
        if self.alpha < 1:
            raise ValueError("SPOD order must be at least 1")
        object.__setattr__(self, "beta", bt)

    def __len__(self) -> int:
        return self.beta.size

    @classmethod
    def normalized(cls, seq, alpha: int, lead: float = SPOD_LEAD) -> "SPODWeights":
        """Weights with ``beta_j = lead * seq_j / max(seq)``.

        Only the decay profile of a regularity sequence is kept; its absolute
        size comes from worst-case constants and overstates interactions.
        """
        seq = np.asarray(seq, dtype=float)
        top = float(seq.max()) if seq.size else 0.0
        if not top > 0.0:
            return cls(seq, alpha)
        return cls(lead * seq / top, alpha)

    def log_order_weights(self, j: int) -> np.ndarray:
        """``log(2^{[k = alpha]} beta_j^k)`` for ``k = 1..alpha``."""
        k = np.arange(1, self.alpha + 1)
        with np.errstate(divide="ignore"):
            out = k * np.log(self.beta[j])
        out[-1] += math.log(2.0)
        return out

    def subset_weight(self, v) -> float:
        """Closed sum over ``nu``; exponential in ``|v|``, for small sets only."""
        v = list(v)
        if not v:
            return 0.0
        total = 0.0
        for nu in np.ndindex(*([self.alpha] * len(v))):
            nu = np.asarray(nu) + 1
            w = math.factorial(int(nu.sum()))
            for j, k in zip(v, nu):
                w *= (2.0 if k == self.alpha else 1.0) * self.beta[j] ** k
            total += w
        return total


Weights = Union[ProductWeights, SPODWeights]


def omega_table(b: int, digits: int, lam: float) -> np.ndarray:
    """``omega_lam(k / b^digits)`` for all ``k < b^digits``.

    With ``t`` the position of the first non-zero digit of ``x``,
    ``omega(x) = (b-1) b^-lam (1 - r^(t-1)) / (1 - r) - b^((t-1)(1-lam) - lam)``
    where ``r = b^(1-lam)``; ``omega(0) = (b-1) b^-lam / (1 - r)``.
    """
    if lam <= 1.0:
        raise ValueError("omega needs lam > 1 for convergence")
    r = b ** (1.0 - lam)
    c = (b - 1) * b ** (-lam) / (1.0 - r)
    t = np.arange(1, digits + 1)
    by_t = c * (1.0 - r ** (t - 1)) - b ** ((t - 1) * (1.0 - lam) - lam)
    N = b ** digits
    out = np.empty(N)
    out[0] = c
    # x = k / b^digits has leading digit at t = digits - floor(log_b k)
    lo = 1
    for tt in range(digits, 0, -1):
        hi = lo * b
        out[lo:hi] = by_t[tt - 1]
        lo = hi
    return out


class _State:
    """Running order/product sums over the coordinates chosen so far."""

    def __init__(self, weights: Weights, n_points: int, s_target: int):
        self.weights = weights
        self.N = n_points
        if isinstance(weights, SPODWeights):
            L = weights.alpha * s_target
            self.U = np.zeros((L + 1, n_points))
            self.U[0] = 1.0
            self.ls = np.full(L + 1, -np.inf)
            self.ls[0] = 0.0
            self.top = 0
        else:
            self.Q = np.ones(n_points)
            self.lq = 0.0

    def z_vector(self, j: int) -> tuple[np.ndarray, float]:
        """``Z`` with ``E_j - E_{j-1} = mean(Phi_j * Z)``, as (scaled Z, log scale)."""
        w = self.weights
        if isinstance(w, ProductWeights):
            g = w.gamma[j]
            if g == 0.0:
                return np.zeros(self.N), 0.0
            return self.Q, self.lq + math.log(g)
        logw = w.log_order_weights(j)
        ell = np.arange(self.top + 1)
        k = np.arange(1, w.alpha + 1)
        coef = logsumexp(logw[None, :] + gammaln(ell[:, None] + k[None, :] + 1), axis=1)
        coef = coef + self.ls[: self.top + 1]
        cmax = np.max(coef)
        if not np.isfinite(cmax):
            return np.zeros(self.N), 0.0
        return np.exp(coef - cmax) @ self.U[: self.top + 1], float(cmax)

    def update(self, j: int, phi: np.ndarray) -> None:
        w = self.weights
        if isinstance(w, ProductWeights):
            self.Q = self.Q * (1.0 + w.gamma[j] * phi)
            self._renorm_product()
            return
        logw = w.log_order_weights(j)
        a = w.alpha
        new_top = min(self.top + a, self.U.shape[0] - 1)
        for ell in range(new_top, 0, -1):
            logs = [self.ls[ell]] + [logw[k - 1] + self.ls[ell - k]
                                     for k in range(1, a + 1) if ell - k >= 0]
            mx = max(logs)
            if not np.isfinite(mx):
                continue
            acc = np.zeros(self.N)
            for k in range(1, a + 1):
                if ell - k >= 0 and np.isfinite(self.ls[ell - k]):
                    acc += math.exp(logw[k - 1] + self.ls[ell - k] - mx) * self.U[ell - k]
            row = acc * phi
            if np.isfinite(self.ls[ell]):
                row += math.exp(self.ls[ell] - mx) * self.U[ell]
            peak = np.abs(row).max()
            if peak > 0.0:
                self.U[ell] = row / peak
                self.ls[ell] = mx + math.log(peak)
            else:
                self.U[ell] = 0.0
                self.ls[ell] = -np.inf
        self.top = new_top

    def _renorm_product(self) -> None:
        peak = np.abs(self.Q).max()
        if peak > 0.0:
            self.Q = self.Q / peak
            self.lq += math.log(peak)


def _scaled_mean(values: np.ndarray, logscale: float) -> float:
    m = float(values.mean())
    if m == 0.0:
        return 0.0
    lg = logscale + math.log(abs(m))
    return math.copysign(math.exp(lg), m) if lg < 709.0 else math.copysign(math.inf, m)


def _check_inputs(b: int, m: int, s_target: int, alpha: int, weights: Weights) -> None:
    if alpha < 2:
        raise ValueError("the interlaced criterion needs alpha >= 2")
    if s_target < 1:
        raise ValueError("s_target must be positive")
    if alpha * s_target > MAX_COMPONENTS:
        raise ValueError(f"alpha * s_target = {alpha * s_target} exceeds {MAX_COMPONENTS} components")
    if len(weights) < s_target:
        raise ValueError(f"{len(weights)} weights given for {s_target} coordinates")
    seq = weights.gamma if isinstance(weights, ProductWeights) else weights.beta
    seq = seq[:s_target]
    if np.any(seq <= 0.0):
        raise ValueError("weights must be positive")
    if np.any(np.diff(seq) > 1e-12 * seq[:-1]):
        raise ValueError("weights must be non-increasing")


def criterion(gv: GeneratingVector, weights: Weights) -> float:
    """Worst-case error criterion of an interlaced rule (``inf`` on overflow)."""
    if gv.alpha < 2:
        raise ValueError("the interlaced criterion needs alpha >= 2")
    b, m, a = gv.b, gv.m, gv.alpha
    om = omega_table(b, m, a)
    X = classical_digits(gv)
    state = _State(weights, gv.n_points, gv.s_target)
    total = 0.0
    for j in range(gv.s_target):
        phi = np.ones(gv.n_points)
        for i in range(1, a + 1):
            phi *= 1.0 + b ** (a - i) * om[X[:, j * a + i - 1]]
        phi -= 1.0
        z, lz = state.z_vector(j)
        total += _scaled_mean(phi * z, lz)
        state.update(j, phi)
    return total


@dataclass(frozen=True)
class CBCResult:
    vector: GeneratingVector
    criterion: float


def _power_table(P: GFPoly) -> np.ndarray:
    """Integer encodings of ``x^k mod P`` for ``k = 0..b^m - 2``."""
    b, m = P.b, P.degree
    N = b ** m
    out = np.empty(N - 1, dtype=np.int64)
    if b == 2:
        Pint = P.to_int()
        r = 1
        for k in range(N - 1):
            out[k] = r
            r <<= 1
            if r >> m & 1:
                r ^= Pint
        return out
    x = GFPoly.monomial(1, b)
    r = GFPoly((1,), b)
    for k in range(N - 1):
        out[k] = r.to_int()
        r = (r * x) % P
    return out


def _pick(scores: np.ndarray, cand_ints: np.ndarray, scale: float) -> int:
    """Index of the minimum; near-ties go to the smallest polynomial."""
    best = scores.min()
    tie = np.flatnonzero(scores <= best + 1e-12 * max(scale, 1e-300))
    return int(tie[np.argmin(cand_ints[tie])])


# refinement sweeps run by default while alpha s^2 alpha N stays below this
REFINE_BUDGET = 2 ** 22
# exhaustive pair moves inside a block need a (b^m)^2 table
PAIR_LIMIT = 512


def _scores(wvec: np.ndarray, fast: bool, om: np.ndarray, b: int, m: int, P: GFPoly,
            pw: Optional[np.ndarray], om_hat: Optional[np.ndarray],
            cand_ints: np.ndarray) -> tuple[np.ndarray, float]:
    """``sum_n wvec[n] omega(x_g[n])`` for every candidate ``g``, and a scale."""
    N = b ** m
    if fast:
        wk = wvec[pw]
        corr = sfft.irfft(np.conj(sfft.rfft(wk)) * om_hat, n=N - 1)
        return corr + wvec[0] * om[0], float(np.abs(wk).sum() * np.abs(om).max())
    scores = np.empty(N - 1)
    for idx, g in enumerate(cand_ints):
        cand_x = _span(generator_columns(int_to_poly(int(g), b), P, m), b, m)
        scores[idx] = wvec @ om[cand_x]
    return scores, float(np.abs(wvec).sum() * np.abs(om).max())


def _refine(polys: list, P: GFPoly, b: int, m: int, alpha: int, s_target: int,
            weights: Weights, om: np.ndarray, sweeps: int, fast: bool,
            pw, om_hat, cand_ints) -> list:
    """Coordinate descent over single polynomials with all others fixed.

    A polynomial is replaced only when the criterion drops by more than a
    relative 1e-12, so every sweep is monotone and the result deterministic.
    """
    N = b ** m
    xs = [_span(generator_columns(g, P, m), b, m) for g in polys]
    fac = [1.0 + b ** (alpha - 1 - (c % alpha)) * om[x] for c, x in enumerate(xs)]

    def phi(j: int) -> np.ndarray:
        return np.prod(fac[j * alpha:(j + 1) * alpha], axis=0) - 1.0

    def set_poly(c: int, g: int) -> None:
        polys[c] = int_to_poly(g, b)
        xs[c] = _span(generator_columns(polys[c], P, m), b, m)
        fac[c] = 1.0 + b ** (alpha - 1 - (c % alpha)) * om[xs[c]]

    # omega at the points of every single candidate, rows in integer order
    table = None
    if N <= PAIR_LIMIT:
        ints = np.arange(1, N, dtype=np.int64)
        table = np.stack([om[_span(generator_columns(int_to_poly(int(g), b), P, m), b, m)]
                          for g in ints])

    def pair_moves(j: int, z: np.ndarray) -> bool:
        """Exhaustive joint choice of two polynomials of block ``j``."""
        moved = False
        for i1 in range(alpha):
            for i2 in range(i1 + 1, alpha):
                c1, c2 = j * alpha + i1, j * alpha + i2
                a1, a2 = float(b ** (alpha - 1 - i1)), float(b ** (alpha - 1 - i2))
                rest = [fac[t] for t in range(j * alpha, (j + 1) * alpha) if t not in (c1, c2)]
                w = z * (np.prod(rest, axis=0) if rest else 1.0)
                lin = table @ w
                S = a1 * lin[:, None] + a2 * lin[None, :] + a1 * a2 * ((table * w) @ table.T)
                k = int(np.argmin(S))
                scale = float(np.abs(S).max())
                g1, g2 = divmod(k, N - 1)
                cur = S[poly_to_int(polys[c1]) - 1, poly_to_int(polys[c2]) - 1]
                if S[g1, g2] < cur - 1e-12 * max(scale, 1e-300):
                    set_poly(c1, g1 + 1)
                    set_poly(c2, g2 + 1)
                    moved = True
        return moved

    for _ in range(sweeps):
        changed = False
        for j in range(s_target):
            state = _State(weights, N, s_target)
            for k in range(s_target):
                if k != j:
                    state.update(k, phi(k))
            z, _ = state.z_vector(j)
            for i in range(alpha):
                c = j * alpha + i
                rest = np.prod([fac[t] for t in range(j * alpha, (j + 1) * alpha) if t != c], axis=0)
                wvec = b ** (alpha - 1 - i) * rest * z
                scores, scale = _scores(wvec, fast, om, b, m, P, pw, om_hat, cand_ints)
                k = _pick(scores, cand_ints, scale)
                current = float(wvec @ om[xs[c]])
                if scores[k] < current - 1e-12 * max(scale, 1e-300):
                    set_poly(c, int(cand_ints[k]))
                    changed = True
            if table is not None:
                changed |= pair_moves(j, z)
        if not changed:
            break
    return polys


def cbc_construct(b: int, m: int, s_target: int, alpha: int, weights: Weights,
                  modulus: Optional[GFPoly] = None, fast: bool = True,
                  refine: Optional[int] = None) -> CBCResult:
    """Greedy choice of ``alpha * s_target`` generating polynomials.

    Parameters
    ----------
    b, m : int
        Prime base and precision; the rule has ``b^m`` points.
    s_target : int
        Dimension after interlacing.
    alpha : int
        Interlacing order (>= 2).
    weights : ProductWeights or SPODWeights
        Positive, non-increasing sequence over the ``s_target`` coordinates.
    modulus : GFPoly, optional
        Irreducible modulus of degree ``m``; a primitive one is used by default.
        The fast path needs a primitive modulus.
    fast : bool
        Score all candidates of a component by one cyclic correlation (FFT)
        instead of ``b^m`` separate sums.
    refine : int, optional
        Coordinate-descent sweeps after the greedy pass.  By default up to 3
        sweeps run for small problems (see ``REFINE_BUDGET``) and none for
        large ones; 0 returns the plain greedy vector.

    Returns
    -------
    CBCResult
        The generating vector and its criterion value.
    """
    _check_inputs(b, m, s_target, alpha, weights)
    if m == 0:
        one = GFPoly((1,), b)
        gv = GeneratingVector(b, 0, alpha, (one,) * (alpha * s_target), one)
        return CBCResult(gv, criterion(gv, weights))
    P = primitive_modulus(m, b) if modulus is None else modulus
    if P.degree != m or not P.is_irreducible():
        raise ValueError(f"modulus {P} is not irreducible of degree {m}")
    if fast and not P.is_primitive():
        raise ValueError("the fast construction requires a primitive modulus")
    N = b ** m
    om = omega_table(b, m, alpha)
    state = _State(weights, N, s_target)

    if fast:
        pw = _power_table(P)
        x_one = _span(generator_columns(GFPoly((1,), b), P, m), b, m)
        om_seq = om[x_one[pw]]
        om_hat = sfft.rfft(om_seq)
        cand_ints = pw

    else:
        pw = om_hat = None
        cand_ints = np.arange(1, N, dtype=np.int64)

    polys: list[GFPoly] = []
    total = 0.0
    for j in range(s_target):
        z, lz = state.z_vector(j)
        part = np.ones(N)
        for i in range(1, alpha + 1):
            c = float(b ** (alpha - i))
            scores, scale = _scores(part * z, fast, om, b, m, P, pw, om_hat, cand_ints)
            k = _pick(scores, cand_ints, scale)
            g = int_to_poly(int(cand_ints[k]), b)
            polys.append(g)
            x = _span(generator_columns(g, P, m), b, m)
            part = part * (1.0 + c * om[x])
        phi = part - 1.0
        total += _scaled_mean(phi * z, lz)
        state.update(j, phi)
        log.debug("cbc coordinate %d/%d done", j + 1, s_target)
    if refine is None:
        refine = 3 if alpha * s_target ** 2 * alpha * N <= REFINE_BUDGET else 0
    if refine > 0:
        polys = _refine(polys, P, b, m, alpha, s_target, weights, om, refine, fast,
                        pw, om_hat, cand_ints)
        gv = GeneratingVector(b, m, alpha, tuple(polys), P)
        return CBCResult(gv, criterion(gv, weights))
    gv = GeneratingVector(b, m, alpha, tuple(polys), P)
    return CBCResult(gv, total)
