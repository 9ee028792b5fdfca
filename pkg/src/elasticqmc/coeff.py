"""Affine-parametric Lame coefficient fields and derived weight sequences.

A field has the form ``base(x) + sum_j params_j * term_j(x)`` with parameters
in [-1/2, 1/2].  Parameters beyond the truncation dimension are zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import zeta

__all__ = [
    "ParametricField",
    "WeightSequences",
    "FieldBounds",
    "AssumptionError",
    "sine_product_field",
    "constant_field",
    "eval_field",
    "derive_weights",
    "tail_sup_sum",
    "grid_mu_min",
    "certify_bounds",
]

HALF_WIDTH = 0.5

ScalarFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class AssumptionError(ValueError):
    """A coefficient field violates the positivity/boundedness assumptions."""


@dataclass(frozen=True)
class ParametricField:
    """Affine expansion ``base(x) + sum_{j<=s} y_j term(j, x)``.

    Parameters
    ----------
    base : callable
        ``base(x1, x2)`` vectorised over arrays.
    term : callable or None
        ``term(j, x1, x2)`` for ``j >= 1``; None for a deterministic field.
    s : int
        Truncation dimension.
    sup_norm : callable or None
        Analytic ``j -> ||term_j||_inf``.  When missing, norms are estimated
        on a 512^2 grid and ``sup_norm_estimated`` is set.
    tail_sum : callable or None
        Closed form of ``sum_{j>s} ||term_j||_inf`` as a function of ``s``.
    """

    base: ScalarFn
    term: Optional[Callable[[int, np.ndarray, np.ndarray], np.ndarray]] = None
    s: int = 0
    sup_norm: Optional[Callable[[int], float]] = None
    tail_sum: Optional[Callable[[int], float]] = None
    tail_bound: Optional[Callable[[int], float]] = None
    name: str = "field"
    _norm_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("truncation dimension must be non-negative")
        if self.s > 0 and self.term is None:
            raise ValueError("a field with s > 0 needs expansion terms")

    @property
    def sup_norm_estimated(self) -> bool:
        return self.s > 0 and self.sup_norm is None

    def truncated(self, s: int) -> "ParametricField":
        return ParametricField(self.base, self.term, s, self.sup_norm, self.tail_sum,
                               self.tail_bound, self.name)

    def sup_norms(self, n: Optional[int] = None) -> np.ndarray:
        """``||term_j||_inf`` for ``j = 1..n`` (default ``n = s``)."""
        n = self.s if n is None else n
        if n == 0:
            return np.zeros(0)
        if self.sup_norm is not None:
            return np.array([abs(self.sup_norm(j)) for j in range(1, n + 1)], dtype=float)
        key = n
        if key not in self._norm_cache:
            t = np.linspace(0.0, 1.0, 512)
            g1, g2 = np.meshgrid(t, t)
            self._norm_cache[key] = np.array(
                [np.abs(self.term(j, g1, g2)).max() for j in range(1, n + 1)])
        return self._norm_cache[key]

    def term_matrix(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        """Matrix ``[term_j(x_i)]`` of shape (n_points, s)."""
        x1 = np.asarray(x1, dtype=float).ravel()
        x2 = np.asarray(x2, dtype=float).ravel()
        out = np.empty((x1.size, self.s))
        for j in range(1, self.s + 1):
            out[:, j - 1] = self.term(j, x1, x2)
        return out

    def base_values(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        return np.broadcast_to(self.base(x1, np.asarray(x2, dtype=float)), x1.shape).astype(float)


@dataclass(frozen=True)
class WeightSequences:
    """Regularity weights feeding the lattice-rule construction.

    ``b_tilde[j-1] = ||psi_j|| / mu_min`` and
    ``b_hat[j-1] = (d/2) ||phi_j|| / mu_min``.
    """

    b_tilde: np.ndarray
    b_hat: np.ndarray
    p: float
    q: float

    @property
    def alpha(self) -> int:
        return math.floor(1.0 / self.p) + 1

    @property
    def beta(self) -> int:
        return math.floor(1.0 / self.q) + 1

    @property
    def gamma(self) -> int:
        """Interlacing order of a single rule over both parameter blocks."""
        return min(math.floor(1.0 / self.p), math.floor(1.0 / self.q)) + 1


def _check_params(params, s: int) -> np.ndarray:
    params = np.atleast_1d(np.asarray(params, dtype=float))
    if params.shape[-1] > s:
        raise ValueError(f"got {params.shape[-1]} parameters for a field truncated at s={s}")
    if np.any(np.abs(params) > HALF_WIDTH):
        raise ValueError("parameters must lie in [-1/2, 1/2]")
    return params


def eval_field(field: ParametricField, x, params=()) -> float:
    """Value of the field at the point ``x`` for one parameter vector.

    Missing trailing parameters are treated as zero.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (2,) or np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("x must be a point of [0, 1]^2")
    params = _check_params(params, field.s)
    value = float(field.base(x[0], x[1]))
    for j, yj in enumerate(params, start=1):
        if yj != 0.0:
            value += yj * float(field.term(j, x[0], x[1]))
    return value


def sine_product_field(base: float, scale: float, s: int, decay: float = 2.0,
                       name: str = "field") -> ParametricField:
    """``base + sum_j y_j (scale / j^decay) sin(j pi x1) sin((2j-1) pi x2)``."""
    if decay <= 1.0:
        raise ValueError("decay exponent must exceed 1 for a summable expansion")
    c = float(scale)

    def term(j, x1, x2):
        return (c / j ** decay) * np.sin(j * np.pi * x1) * np.sin((2 * j - 1) * np.pi * x2)

    return ParametricField(
        base=lambda x1, x2: np.full(np.shape(x1), float(base)),
        term=term,
        s=s,
        sup_norm=lambda j: abs(c) / j ** decay,
        tail_sum=lambda n: abs(c) * float(zeta(decay, n + 1)),
        tail_bound=lambda n: abs(c) * max(n, 1) ** (1.0 - decay) / (decay - 1.0),
        name=name,
    )


def constant_field(value: float, name: str = "field") -> ParametricField:
    return ParametricField(base=lambda x1, x2: np.full(np.shape(x1), float(value)), name=name)


def derive_weights(mu_field: ParametricField, lambda_field: ParametricField,
                   mu_min: float, d: int = 2, p: float = 1.0, q: float = 1.0) -> WeightSequences:
    if not mu_min > 0.0:
        raise ValueError(f"mu_min must be positive, got {mu_min!r}")
    if not (0.0 < p <= 1.0 and 0.0 < q <= 1.0):
        raise ValueError("summability exponents p, q must lie in (0, 1]")
    b_tilde = mu_field.sup_norms() / mu_min
    b_hat = 0.5 * d * lambda_field.sup_norms() / mu_min
    return WeightSequences(b_tilde, b_hat, p, q)


def tail_sup_sum(field: ParametricField, s: int, tol: float = 1e-12,
                 max_terms: int = 10**8) -> float:
    """``sum_{j>s} ||term_j||_inf``, accurate to ``tol``.

    Uses the field's closed-form tail when available, otherwise sums the
    analytic norms in growing chunks until ``tail_bound`` drops below ``tol``.
    """
    if field.tail_sum is not None:
        return float(field.tail_sum(s))
    if field.term is None:
        return 0.0
    if field.sup_norm is None or field.tail_bound is None:
        raise ValueError("tail sums need an analytic sup_norm and a tail_bound")
    partial = []
    j, chunk = s + 1, 4096
    while True:
        stop = j + chunk - 1
        partial.append(math.fsum(abs(field.sup_norm(k)) for k in range(j, stop + 1)))
        if field.tail_bound(stop) < tol:
            return math.fsum(partial)
        if stop - s > max_terms:
            raise ValueError("tail does not reach the requested accuracy within max_terms")
        j, chunk = stop + 1, 2 * chunk


def grid_mu_min(field: ParametricField, n: int = 256) -> float:
    """Minimum over an ``n x n`` grid of ``base(x) - (1/2) sum_j |term_j(x)|``."""
    t = np.linspace(0.0, 1.0, n)
    g1, g2 = np.meshgrid(t, t)
    low = field.base_values(g1, g2).copy()
    for j in range(1, field.s + 1):
        low -= HALF_WIDTH * np.abs(field.term(j, g1, g2))
    return float(low.min())


@dataclass(frozen=True)
class FieldBounds:
    mu_min: float
    mu_lower: float
    mu_max: float
    lambda_lower: float
    lambda_max: float


def _envelope(field: ParametricField, n: int = 256) -> tuple[float, float, float]:
    t = np.linspace(0.0, 1.0, n)
    g1, g2 = np.meshgrid(t, t)
    base = field.base_values(g1, g2)
    radius = HALF_WIDTH * float(field.sup_norms().sum())
    return grid_mu_min(field, n), float(base.min()) - radius, float(base.max()) + radius


def certify_bounds(mu_field: ParametricField, lambda_field: ParametricField,
                   n_samples: int = 1000, seed: int = 0) -> FieldBounds:
    """Check positivity and boundedness of both fields on random samples.

    The lower/upper envelopes use sup norms (valid for every x and every
    parameter in the box); the grid minimum is what enters the weights.
    Raises ``AssumptionError`` on any violation.
    """
    mu_min, mu_lower, mu_max = _envelope(mu_field)
    lam_grid, lam_lower, lam_max = _envelope(lambda_field)
    if mu_min <= 0.0:
        raise AssumptionError(f"mu is not uniformly positive (grid minimum {mu_min:.3e})")
    if lam_grid < 0.0:
        raise AssumptionError(f"lambda takes negative values (grid minimum {lam_grid:.3e})")

    rng = np.random.default_rng(seed)
    x = rng.random((n_samples, 2))
    lo_mu = min(mu_lower, mu_min)
    lo_lam = min(lam_lower, lam_grid)
    for fld, lo, hi, strict, label in ((mu_field, lo_mu, mu_max, True, "mu"),
                                       (lambda_field, lo_lam, lam_max, False, "lambda")):
        y = rng.uniform(-HALF_WIDTH, HALF_WIDTH, (n_samples, fld.s))
        vals = fld.base_values(x[:, 0], x[:, 1])
        if fld.s:
            vals = vals + np.einsum("ij,ij->i", fld.term_matrix(x[:, 0], x[:, 1]), y)
        bad = (vals <= 0.0) if strict else (vals < 0.0)
        bad |= (vals < lo - 1e-12) | (vals > hi + 1e-12)
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise AssumptionError(f"{label}={vals[k]:.6g} at x={x[k]} violates the bounds "
                                  f"[{lo:.6g}, {hi:.6g}]")
    return FieldBounds(mu_min, lo_mu, mu_max, lo_lam, lam_max)
