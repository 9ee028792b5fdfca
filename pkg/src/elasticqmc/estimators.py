"""QMC estimators of the expected value of a solution functional.

Three rules are provided over the parameter box ``[-1/2, 1/2]^(s1 + s2)``:

* ``tensor_estimate``: product of an ``s1``-dimensional rule in ``y`` and an
  ``s2``-dimensional rule in ``z``;
* ``sparse_estimate``: combination of tensor rules along the diagonal
  ``j + k = L``, written as a telescoping sum in ``k``;
* ``direct_estimate``: one interlaced rule in ``s1 + s2`` dimensions.

All averages go through :func:`parallel_sweep`, which evaluates points in any
number of worker processes but always reduces in the same fixed pairwise
order, so results do not depend on the worker count.
"""
from __future__ import annotations

import logging
import math
import multiprocessing as mp
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .coeff import WeightSequences
from .qmc import (
    GeneratingVector,
    PointSet,
    SPOD_LEAD,
    SPODWeights,
    cbc_construct,
    generate_points,
    importance_order,
)

__all__ = [
    "EstimatorConfig",
    "Estimate",
    "SweepError",
    "RuleFamily",
    "shift_to_centered",
    "pairwise_sum",
    "pairwise_mean",
    "parallel_sweep",
    "tensor_estimate",
    "balance_exponents",
    "sparse_schedule",
    "sparse_estimate",
    "direct_estimate",
    "direct_rule_weights",
    "rule_weights",
]

log = logging.getLogger(__name__)

Functional = Callable[[np.ndarray, np.ndarray], float]


class SweepError(RuntimeError):
    """A point evaluation failed; ``index`` is the offending point."""

    def __init__(self, index: int, message: str):
        super().__init__(f"point {index}: {message}")
        self.index = index


@dataclass(frozen=True)
class EstimatorConfig:
    """Truncation, discretisation and rule parameters of one estimate.

    Attributes
    ----------
    s1, s2 : int
        Truncation dimensions of ``y`` and ``z``.
    J, r : int
        Mesh subdivisions and polynomial degree.
    p, q : float
        Summability exponents; they fix the interlacing orders.
    theta : float
        Sparse-grid schedule factor, ``N1^(j) = b^ceil(j p theta)``.
    mode : {"tensor", "sparse", "direct"}
    L : int, optional
        Sparse-grid level.
    m1, m2 : int, optional
        Tensor-rule exponents, ``N1 = b^m1`` and ``N2 = b^m2``.
    m : int, optional
        Direct-rule exponent.
    """

    s1: int
    s2: int
    J: int
    r: int
    p: float = 0.5
    q: float = 0.5
    theta: float = 2.0
    b: int = 2
    mode: str = "tensor"
    L: Optional[int] = None
    m1: Optional[int] = None
    m2: Optional[int] = None
    m: Optional[int] = None

    def __post_init__(self):
        if self.s1 < 0 or self.s2 < 0:
            raise ValueError("truncation dimensions must be non-negative")
        if self.J < 1 or self.r not in (1, 2):
            raise ValueError("need J >= 1 and r in {1, 2}")
        if not (0.0 < self.p <= 1.0 and 0.0 < self.q <= 1.0):
            raise ValueError("p and q must lie in (0, 1]")
        if self.mode == "sparse":
            if self.L is None or self.L < 2:
                raise ValueError("sparse mode needs a level L >= 2")
            if not (self.theta > 0 and self.p * self.theta >= 1 - 1e-12
                    and self.q * self.theta >= 1 - 1e-12):
                raise ValueError("sparse mode needs theta > 0 with p*theta >= 1 and q*theta >= 1")
        elif self.mode == "tensor":
            if self.m1 is None or self.m2 is None or self.m1 < 0 or self.m2 < 0:
                raise ValueError("tensor mode needs exponents m1, m2 >= 0")
        elif self.mode == "direct":
            if self.m is None or self.m < 0:
                raise ValueError("direct mode needs an exponent m >= 0")
        else:
            raise ValueError(f"unknown estimator mode {self.mode!r}")

    @property
    def alpha(self) -> int:
        return math.floor(1.0 / self.p) + 1

    @property
    def beta(self) -> int:
        return math.floor(1.0 / self.q) + 1

    @property
    def gamma(self) -> int:
        return min(math.floor(1.0 / self.p), math.floor(1.0 / self.q)) + 1

    @property
    def balanced(self) -> bool:
        """Tensor-rule balance condition ``|m1 q - m2 p| < 1``."""
        return abs(self.m1 * self.q - self.m2 * self.p) < 1.0


@dataclass
class Estimate:
    """Result of one QMC estimate.

    ``terms`` maps a label to its contribution; for sparse grids the labels
    are ``(L - k, k)`` and the value is their ordered sum.
    """

    value: float
    n_solves: int
    n_points: int
    wall_time: float
    terms: dict = field(default_factory=dict)
    values: Optional[np.ndarray] = field(default=None, repr=False)


def shift_to_centered(points) -> np.ndarray:
    """Map nodes in [0, 1)^s to the parameter box [-1/2, 1/2)^s."""
    pts = np.asarray(points.points if isinstance(points, PointSet) else points, dtype=float)
    if pts.size and (pts.min() < 0.0 or pts.max() >= 1.0):
        raise ValueError("points must lie in [0, 1)")
    return pts - 0.5


def pairwise_sum(values: Sequence[float]) -> float:
    """Sum in a fixed balanced-tree order (independent of how values were produced)."""
    a = np.array(values, dtype=float).ravel()
    if a.size == 0:
        return 0.0
    while a.size > 1:
        half = a.size // 2
        paired = a[0:2 * half:2] + a[1:2 * half:2]
        a = np.concatenate([paired, a[2 * half:]]) if a.size % 2 else paired
    return float(a[0])


def pairwise_mean(values: Sequence[float]) -> float:
    n = len(values)
    if n == 0:
        raise ValueError("mean of an empty sample")
    return pairwise_sum(values) / n


# Worker processes are forked, so the integrand is shared through this
# module-level slot rather than pickled.
_SWEEP: dict = {}


def _eval_block(bounds: tuple[int, int]):
    func, points = _SWEEP["func"], _SWEEP["points"]
    lo, hi = bounds
    out = np.empty(hi - lo)
    for i in range(lo, hi):
        try:
            out[i - lo] = func(points[i])
        except Exception as exc:  # reported with its index in the parent
            return ("error", i, f"{type(exc).__name__}: {exc}")
    return ("ok", lo, out)


def parallel_sweep(points: np.ndarray, func: Callable[[np.ndarray], float],
                   reducer: Callable[[np.ndarray], float] = pairwise_mean,
                   workers: int = 1) -> Estimate:
    """Evaluate ``func`` on every row of ``points`` and reduce.

    Parameters
    ----------
    points : ndarray, shape (n, d)
    func : callable
        Pure function of one row.
    reducer : callable
        Applied to the values in point-index order.
    workers : int
        Number of forked processes; the result is bit-identical for any value.
    """
    t0 = time.perf_counter()
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if workers < 1:
        raise ValueError("workers must be positive")
    values = np.empty(n)
    if workers == 1 or n < 2:
        for i in range(n):
            try:
                values[i] = func(points[i])
            except Exception as exc:
                raise SweepError(i, f"{type(exc).__name__}: {exc}") from exc
    else:
        n_blocks = min(n, 4 * workers)
        edges = np.linspace(0, n, n_blocks + 1).astype(int)
        blocks = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
        _SWEEP.update(func=func, points=points)
        try:
            with mp.get_context("fork").Pool(workers) as pool:
                for status, lo, payload in pool.imap(_eval_block, blocks):
                    if status == "error":
                        pool.terminate()
                        raise SweepError(lo, payload)
                    values[lo:lo + payload.size] = payload
        finally:
            _SWEEP.clear()
    value = float(reducer(values))
    return Estimate(value, n, n, time.perf_counter() - t0, values=values)


class RuleFamily:
    """Interlaced polynomial lattice rules of one dimension, built on demand.

    Rules are constructed by CBC for each requested exponent ``m`` and kept,
    so nested schedules reuse them.  Generating vectors are deterministic in
    ``(b, m, s, alpha, weights)``.
    """

    def __init__(self, s: int, alpha: int, weights: Optional[SPODWeights], b: int = 2):
        if s > 0 and weights is None:
            raise ValueError("weights are required for a non-empty rule")
        self.s, self.alpha, self.weights, self.b = s, alpha, weights, b
        self._vectors: dict[int, GeneratingVector] = {}
        self._points: dict[int, PointSet] = {}

    def vector(self, m: int) -> GeneratingVector:
        if m not in self._vectors:
            t0 = time.perf_counter()
            res = cbc_construct(self.b, m, self.s, self.alpha, self.weights)
            log.info("CBC b=%d m=%d s=%d alpha=%d in %.1fs", self.b, m, self.s, self.alpha,
                     time.perf_counter() - t0)
            self._vectors[m] = res.vector
        return self._vectors[m]

    def set_vector(self, gv: GeneratingVector) -> None:
        """Use an externally supplied vector for its exponent."""
        if gv.s_target < self.s or gv.alpha != self.alpha or gv.b != self.b:
            raise ValueError("vector does not match the rule family")
        self._vectors[gv.m] = gv.truncated(self.s)
        self._points.pop(gv.m, None)

    def points(self, m: int) -> PointSet:
        if m not in self._points:
            if self.s == 0:
                n = self.b ** m
                self._points[m] = PointSet(np.zeros((n, 0)), "interlaced", self.alpha,
                                           self.b, m, self.alpha * m)
            else:
                self._points[m] = generate_points(self.vector(m))
        return self._points[m]


def _tensor_rows(rule_y: PointSet, rule_z: PointSet) -> np.ndarray:
    y = shift_to_centered(rule_y)
    z = shift_to_centered(rule_z)
    n1, n2 = y.shape[0], z.shape[0]
    return np.hstack([np.repeat(y, n2, axis=0), np.tile(z, (n1, 1))])


def _split_functional(functional: Functional, s1: int) -> Callable[[np.ndarray], float]:
    return lambda row: functional(row[:s1], row[s1:])


def tensor_estimate(config: EstimatorConfig, rule_y: PointSet, rule_z: PointSet,
                    functional: Functional, workers: int = 1) -> Estimate:
    """``(1/(N1 N2)) sum_j sum_k F(y_j - 1/2, z_k - 1/2)``.

    Points are visited with ``j`` outer and ``k`` inner.
    """
    if config.mode != "tensor":
        raise ValueError("tensor_estimate needs a tensor-mode configuration")
    if rule_y.dim != config.s1 or rule_z.dim != config.s2:
        raise ValueError(f"rule dimensions ({rule_y.dim}, {rule_z.dim}) do not match "
                         f"(s1, s2) = ({config.s1}, {config.s2})")
    if config.s1 and config.s2 and not config.balanced:
        warnings.warn(f"tensor exponents violate |m1 q - m2 p| < 1 "
                      f"(m1={config.m1}, m2={config.m2})", stacklevel=2)
    rows = _tensor_rows(rule_y, rule_z)
    est = parallel_sweep(rows, _split_functional(functional, config.s1), workers=workers)
    est.terms = {(config.m1, config.m2): est.value}
    return est


def balance_exponents(m: int, p: float, q: float) -> tuple[int, int, bool]:
    """Split ``m = m1 + m2`` minimising ``|m1 q - m2 p|``.

    Returns ``(m1, m2, feasible)`` where ``feasible`` means the minimum is
    below 1.  Ties go to the larger ``m1``.
    """
    if m < 2:
        raise ValueError("need m >= 2 to give both rules at least one digit")
    best = min(range(1, m), key=lambda m1: (abs(m1 * q - (m - m1) * p), -m1))
    gap = abs(best * q - (m - best) * p)
    return best, m - best, gap < 1.0


def _ceil_exact(x: float) -> int:
    return math.ceil(round(x, 9))


def sparse_schedule(L: int, p: float, q: float, theta: float) -> list[tuple[int, int, int, int]]:
    """``(j, k, m1, m2)`` for the positive terms ``Q(L-k, k)``, ``k = 1..L-1``."""
    return [(L - k, k, _ceil_exact((L - k) * p * theta), _ceil_exact(k * q * theta))
            for k in range(1, L)]


def sparse_estimate(config: EstimatorConfig, functional: Functional, rules_y: RuleFamily,
                    rules_z: RuleFamily, workers: int = 1,
                    cache: Optional[dict] = None) -> Estimate:
    """Sparse-grid combination
    ``sum_{k=1}^{L-1} (Q(L-k, k) - Q(L-k, k-1))`` with ``Q(., 0) = 0``.

    ``cache`` maps ``(m1, m2)`` to tensor-rule averages and is filled in
    place, so successive levels only evaluate new grids.  ``n_solves``
    counts fresh evaluations; ``n_points`` is
    ``M = sum_k N1^(L-k) N2^(k)``.
    """
    if config.mode != "sparse":
        raise ValueError("sparse_estimate needs a sparse-mode configuration")
    t0 = time.perf_counter()
    cache = {} if cache is None else cache
    b, p, q, th = config.b, config.p, config.q, config.theta
    fresh = 0

    def Q(j: int, k: int) -> float:
        nonlocal fresh
        if k == 0:
            return 0.0
        key = (_ceil_exact(j * p * th), _ceil_exact(k * q * th))
        if key not in cache:
            m1, m2 = key
            rows = _tensor_rows(rules_y.points(m1), rules_z.points(m2))
            est = parallel_sweep(rows, _split_functional(functional, config.s1), workers=workers)
            cache[key] = est.value
            fresh += est.n_solves
        return cache[key]

    terms = {}
    M = 0
    for j, k, m1, m2 in sparse_schedule(config.L, p, q, th):
        terms[(j, k)] = Q(j, k) - Q(j, k - 1)
        M += b ** m1 * b ** m2
    value = 0.0
    for t in terms.values():
        value += t
    return Estimate(value, fresh, M, time.perf_counter() - t0, terms)


def rule_weights(seq, alpha: int, lead: float = SPOD_LEAD) -> SPODWeights:
    """Normalised SPOD weights of order ``alpha`` for one parameter block."""
    return SPODWeights.normalized(seq, alpha, lead)


def direct_rule_weights(weights: WeightSequences, s1: int, s2: int,
                        lead: float = SPOD_LEAD) -> tuple[SPODWeights, np.ndarray]:
    """SPOD weights and component order for one rule over ``[y | z]``.

    Components are sorted by decreasing weight (see ``importance_order``); the
    rule uses order ``gamma = min(floor(1/p), floor(1/q)) + 1``.
    """
    bt = np.asarray(weights.b_tilde[:s1], float)
    bh = np.asarray(weights.b_hat[:s2], float)
    if bt.size < s1 or bh.size < s2:
        raise ValueError("weight sequences are shorter than the truncation dimensions")
    order = importance_order(bt, bh)
    seq = np.concatenate([bt, bh])[order]
    return SPODWeights.normalized(seq, weights.gamma, lead), order


def direct_estimate(config: EstimatorConfig, rule: PointSet, functional: Functional,
                    order: Optional[np.ndarray] = None, workers: int = 1) -> Estimate:
    """``(1/N) sum_n F(r_n - 1/2)`` with ``r_n`` split into ``(y, z)``.

    ``order[c]`` is the ``[y | z]`` index fed by rule coordinate ``c``
    (identity by default).
    """
    if config.mode != "direct":
        raise ValueError("direct_estimate needs a direct-mode configuration")
    d = config.s1 + config.s2
    if rule.dim != d:
        raise ValueError(f"rule has {rule.dim} dimensions, expected s1 + s2 = {d}")
    pts = shift_to_centered(rule)
    if order is not None:
        order = np.asarray(order)
        if sorted(order.tolist()) != list(range(d)):
            raise ValueError("order must be a permutation of the s1 + s2 components")
        full = np.empty_like(pts)
        full[:, order] = pts
        pts = full
    est = parallel_sweep(pts, _split_functional(functional, config.s1), workers=workers)
    est.terms = {config.m: est.value}
    return est
