"""Example problems, experiment configurations and convergence reports.

An experiment is described by an INI file with an ``[experiment]`` section
and an optional ``[reference]`` section::

    [experiment]
    preset = 4a          ; start from a preset, then override keys below
    J = 32
    s1 = 64
    s2 = 64
    levels = 8 9 10

    [reference]
    mode = direct
    m = 16

Keys of ``[experiment]``: ``preset``, ``example`` (1-4), ``mode`` (fem,
tensor, direct or sparse), ``J`` (list in fem mode), ``degree``, ``s1``,
``s2``, ``levels`` (mesh-free exponent list: ``m`` of the varying rule in
tensor mode, ``m`` in direct mode, ``L`` in sparse mode), ``vary`` (y or z,
tensor mode), ``p``, ``q``, ``theta``, ``weight_lead``, ``workers``,
``seed``, ``out``.  Keys of ``[reference]``: ``mode`` (tensor or direct),
``J``, ``degree``, ``s1``, ``s2``, ``m1``, ``m2``, ``m``.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .coeff import (ParametricField, WeightSequences, certify_bounds, constant_field,
                    derive_weights, grid_mu_min, sine_product_field)
from .estimators import (EstimatorConfig, RuleFamily, direct_estimate, direct_rule_weights,
                         rule_weights, sparse_estimate, tensor_estimate)
from .fem import (ElasticityProblem, affine_load, empirical_rate, example1_exact_and_forcing,
                  example1_fields, functional_mean, l2_error_centroid)
from .mesh import build_dofmap, build_uniform_mesh, triangle_quadrature
from .qmc import SPOD_LEAD

__all__ = [
    "PRESETS",
    "ExperimentConfig",
    "ReferenceSpec",
    "ConvergenceReport",
    "ConfigError",
    "CacheCorruptError",
    "ReferenceCache",
    "example_fields",
    "build_problem",
    "preset_config",
    "load_config",
    "parse_config",
    "build_reference",
    "run_experiment",
    "emit_plot_data",
    "read_report",
    "format_error",
]

log = logging.getLogger(__name__)

PRESETS = ("1", "2", "3", "4a", "4b")
MODES = ("fem", "tensor", "direct", "sparse")
# bump when a change alters reference values for an unchanged configuration
REFERENCE_SCHEMA = 1


class ConfigError(ValueError):
    """Invalid experiment configuration; raised before any solve."""


class CacheCorruptError(RuntimeError):
    """A cached reference failed its checksum."""


# ----------------------------------------------------------------------
# problems

def example_fields(example: int, s1: int = 0, s2: int = 0) -> tuple[ParametricField, ParametricField]:
    """Lame fields ``(mu, lambda)`` of the numbered example, truncated at ``(s1, s2)``."""
    if example == 1:
        return example1_fields()
    if example == 2:
        return sine_product_field(0.1, 0.1, s1, name="mu"), constant_field(1.0, "lambda")
    if example == 3:
        return constant_field(1.0, "mu"), sine_product_field(1.0, 1.0, s2, name="lambda")
    if example == 4:
        return (sine_product_field(1.0, 1.0, s1, name="mu"),
                sine_product_field(1.0, 1.0, s2, name="lambda"))
    raise ConfigError(f"unknown example {example!r}")


def build_problem(example: int, J: int, degree: int, s1: int = 0, s2: int = 0) -> ElasticityProblem:
    """Discrete problem of an example on the ``J x J`` mesh.

    Example 1 integrates the P1 interpolants of its coefficients with a
    degree-2 rule and the load with the centroid rule; the random examples
    use the exact fields and the default quadrature of the element.
    """
    mu, lam = example_fields(example, s1, s2)
    mesh = build_uniform_mesh(J)
    dofmap = build_dofmap(mesh, degree)
    if example == 1:
        _, forcing = example1_exact_and_forcing()
        return ElasticityProblem(mesh, dofmap, mu, lam, forcing, triangle_quadrature(2),
                                 load_quad=triangle_quadrature(1), interpolate_coefficients=True)
    return ElasticityProblem(mesh, dofmap, mu, lam, affine_load)


def example_weights(example: int, s1: int, s2: int, p: float, q: float) -> WeightSequences:
    mu, lam = example_fields(example, s1, s2)
    return derive_weights(mu, lam, grid_mu_min(mu), p=p, q=q)


# ----------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class ReferenceSpec:
    """Rule and discretisation of a reference value.

    ``mode`` is "tensor" (exponents ``m1``, ``m2``) or "direct" (``m``).
    """

    mode: str
    J: int
    degree: int
    s1: int
    s2: int
    m1: int = 0
    m2: int = 0
    m: int = 0

    @property
    def n_points(self) -> int:
        return 2 ** self.m if self.mode == "direct" else 2 ** (self.m1 + self.m2)


@dataclass(frozen=True)
class ExperimentConfig:
    """One convergence study; see the module docstring for the file format."""

    example: int
    mode: str
    J: tuple[int, ...]
    degree: int
    s1: int = 0
    s2: int = 0
    levels: tuple[int, ...] = ()
    vary: str = "y"
    p: float = 0.5
    q: float = 0.5
    theta: float = 2.0
    weight_lead: float = SPOD_LEAD
    reference: Optional[ReferenceSpec] = None
    preset: Optional[str] = None
    workers: int = 1
    seed: int = 0
    out: str = "results"

    def validate(self) -> "ExperimentConfig":
        if self.example not in (1, 2, 3, 4):
            raise ConfigError(f"example must be 1, 2, 3 or 4, got {self.example}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if (self.mode == "fem") != (self.example == 1):
            raise ConfigError("fem mode is for example 1, which has no random parameters")
        if self.degree not in (1, 2):
            raise ConfigError(f"degree must be 1 or 2, got {self.degree}")
        if not self.J or any(j < 1 for j in self.J):
            raise ConfigError("J must list positive mesh sizes")
        if self.mode != "fem" and len(self.J) != 1:
            raise ConfigError("QMC modes use a single mesh size J")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if not (0.0 < self.p <= 1.0 and 0.0 < self.q <= 1.0):
            raise ConfigError("p and q must lie in (0, 1]")
        if not self.weight_lead > 0.0:
            raise ConfigError("weight_lead must be positive")
        if self.mode == "fem":
            return self
        if self.s1 < 0 or self.s2 < 0:
            raise ConfigError("truncation dimensions must be non-negative")
        if self.example == 2 and self.s2:
            raise ConfigError("example 2 has a constant lambda; set s2 = 0")
        if self.example == 3 and self.s1:
            raise ConfigError("example 3 has a constant mu; set s1 = 0")
        if not self.levels or list(self.levels) != sorted(set(self.levels)):
            raise ConfigError("levels must be a non-empty increasing list")
        if self.mode == "tensor" and self.vary not in ("y", "z"):
            raise ConfigError("vary must be 'y' or 'z'")
        if self.mode == "sparse" and self.levels[0] < 2:
            raise ConfigError("sparse levels start at L = 2")
        if min(self.levels) < 0:
            raise ConfigError("exponents must be non-negative")
        ref = self.reference
        if ref is None:
            raise ConfigError("QMC modes need a [reference] section or preset")
        if ref.mode not in ("tensor", "direct"):
            raise ConfigError(f"reference mode must be tensor or direct, got {ref.mode!r}")
        if ref.degree not in (1, 2) or ref.J < 1 or ref.s1 < 0 or ref.s2 < 0:
            raise ConfigError("reference needs J >= 1, degree in {1, 2} and s1, s2 >= 0")
        if (self.example == 2 and ref.s2) or (self.example == 3 and ref.s1):
            raise ConfigError("reference truncation must match the random coefficient")
        # interlaced points carry alpha*m binary digits in a double
        orders = (self._order(self.p), self._order(self.q))
        top = max(self.levels) if self.mode != "sparse" else \
            math.ceil(max(self.levels) * max(self.p, self.q) * self.theta)
        for m in (top, ref.m1, ref.m2, ref.m):
            if max(orders) * m > 53:
                raise ConfigError(f"exponent {m} exceeds double precision at interlacing order "
                                  f"{max(orders)}")
        return self

    @staticmethod
    def _order(p: float) -> int:
        return math.floor(1.0 / p) + 1

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["J"] = list(self.J)
        d["levels"] = list(self.levels)
        return d

    def digest(self) -> str:
        """Hash of everything that determines the numbers (not workers or paths)."""
        d = self.to_dict()
        for k in ("workers", "out", "preset"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


_DESK = {
    "1": dict(example=1, mode="fem", J=(8, 16, 32, 64, 128), degree=1),
    "2": dict(example=2, mode="tensor", J=(32,), degree=2, s1=64, s2=0, vary="y",
              levels=tuple(range(3, 9)),
              reference=ReferenceSpec("tensor", 32, 2, 64, 0, m1=12, m2=0)),
    "3": dict(example=3, mode="tensor", J=(32,), degree=2, s1=0, s2=64, vary="z",
              levels=tuple(range(3, 9)),
              reference=ReferenceSpec("tensor", 32, 2, 0, 64, m1=0, m2=12)),
    "4a": dict(example=4, mode="direct", J=(32,), degree=2, s1=64, s2=64,
               levels=tuple(range(8, 14)),
               reference=ReferenceSpec("direct", 32, 2, 64, 64, m=16)),
    "4b": dict(example=4, mode="sparse", J=(32,), degree=2, s1=64, s2=64,
               levels=tuple(range(5, 10)),
               reference=ReferenceSpec("direct", 32, 2, 64, 64, m=16)),
}

_PAPER = {
    "1": {},
    "2": dict(J=(128,), s1=256, reference=ReferenceSpec("tensor", 128, 2, 256, 0, m1=10, m2=0)),
    "3": dict(J=(128,), s2=256, reference=ReferenceSpec("tensor", 128, 2, 0, 256, m1=0, m2=10)),
    "4a": dict(J=(128,), s1=256, s2=256,
               reference=ReferenceSpec("tensor", 128, 2, 256, 256, m1=11, m2=11)),
    "4b": dict(J=(128,), s1=256, s2=256, levels=tuple(range(9, 16)),
               reference=ReferenceSpec("tensor", 128, 2, 256, 256, m1=11, m2=11)),
}


def preset_config(preset: str, paper_scale: bool = False, **overrides) -> ExperimentConfig:
    """Configuration of a preset at desk scale (default) or paper scale."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    kw = dict(_DESK[preset])
    if paper_scale:
        kw.update(_PAPER[preset])
    kw.update(overrides)
    kw["preset"] = preset
    return ExperimentConfig(**kw).validate()


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(",", " ").split())


_SCALARS = {"example": int, "degree": int, "s1": int, "s2": int, "p": float, "q": float,
            "theta": float, "weight_lead": float, "workers": int, "seed": int,
            "mode": str, "vary": str, "out": str}


def parse_config(text: str, paper_scale: bool = False) -> ExperimentConfig:
    """Parse an INI experiment description; unknown keys are rejected."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable configuration: {exc}") from None
    if not cp.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    extra = set(cp.sections()) - {"experiment", "reference"}
    if extra:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(extra))}")
    sec = cp["experiment"]
    kw: dict = {}
    preset = sec.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        kw.update(_DESK[preset])
        if paper_scale:
            kw.update(_PAPER[preset])
        kw["preset"] = preset
    try:
        for key, raw in sec.items():
            if key == "preset":
                continue
            if key in ("j", "levels"):
                kw["J" if key == "j" else key] = _ints(raw)
            elif key in _SCALARS:
                kw[key] = _SCALARS[key](raw)
            else:
                raise ConfigError(f"[experiment]: unknown key {key!r}")
        if cp.has_section("reference"):
            base = kw.get("reference")
            rd = dataclasses.asdict(base) if base is not None else \
                dict(mode="tensor", J=kw.get("J", (0,))[0], degree=kw.get("degree", 2),
                     s1=kw.get("s1", 0), s2=kw.get("s2", 0))
            for key, raw in cp["reference"].items():
                if key == "mode":
                    rd["mode"] = raw
                elif key in ("j", "degree", "s1", "s2", "m1", "m2", "m"):
                    rd["J" if key == "j" else key] = int(raw)
                else:
                    raise ConfigError(f"[reference]: unknown key {key!r}")
            kw["reference"] = ReferenceSpec(**rd)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad value: {exc}") from None
    missing = {"example", "mode", "J", "degree"} - set(kw)
    if missing:
        raise ConfigError(f"missing key(s): {', '.join(sorted(missing))}")
    return ExperimentConfig(**kw).validate()


def load_config(path, paper_scale: bool = False) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), paper_scale)


# ----------------------------------------------------------------------
# atomic output

def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ----------------------------------------------------------------------
# reference cache

class ReferenceCache:
    """Reference values on disk, one JSON file per configuration hash.

    Entries are never invalidated automatically; pass ``rebuild=True`` to
    :func:`build_reference` to recompute one.
    """

    def __init__(self, root=None):
        root = root if root is not None else os.environ.get("ELASTICQMC_CACHE", ".reference-cache")
        self.root = Path(root)

    def path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    @staticmethod
    def _checksum(record: dict) -> str:
        body = {k: v for k, v in record.items() if k != "checksum"}
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()

    def get(self, key: str) -> Optional[dict]:
        path = self.path(key)
        if not path.exists():
            return None
        try:
            record = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CacheCorruptError(f"{path}: unreadable ({exc})") from None
        if record.get("checksum") != self._checksum(record) or record.get("key") != key:
            raise CacheCorruptError(f"{path}: checksum mismatch; rebuild this reference")
        return record

    def put(self, key: str, record: dict) -> None:
        record = dict(record, key=key)
        record["checksum"] = self._checksum(record)
        _atomic_write(self.path(key), json.dumps(record, indent=1, sort_keys=True) + "\n")


def reference_key(cfg: ExperimentConfig) -> str:
    ref = cfg.reference
    d = dict(schema=REFERENCE_SCHEMA, example=cfg.example, p=cfg.p, q=cfg.q,
             weight_lead=cfg.weight_lead, **dataclasses.asdict(ref))
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:24]


@dataclass
class ReferenceResult:
    value: float
    key: str
    hit: bool
    n_solves: int
    wall_time: float


def _families(cfg: ExperimentConfig, s1: int, s2: int) -> tuple[RuleFamily, RuleFamily]:
    ws = example_weights(cfg.example, s1, s2, cfg.p, cfg.q)
    fy = RuleFamily(s1, ws.alpha, rule_weights(ws.b_tilde, ws.alpha, cfg.weight_lead) if s1 else None)
    fz = RuleFamily(s2, ws.beta, rule_weights(ws.b_hat, ws.beta, cfg.weight_lead) if s2 else None)
    return fy, fz


def _direct_family(cfg: ExperimentConfig, s1: int, s2: int):
    ws = example_weights(cfg.example, s1, s2, cfg.p, cfg.q)
    weights, order = direct_rule_weights(ws, s1, s2, cfg.weight_lead)
    return RuleFamily(s1 + s2, ws.gamma, weights), order


def _check_assumptions(cfg: ExperimentConfig, s1: int, s2: int) -> None:
    mu, lam = example_fields(cfg.example, s1, s2)
    certify_bounds(mu, lam, seed=cfg.seed)


def build_reference(cfg: ExperimentConfig, cache: Optional[ReferenceCache] = None,
                    rebuild: bool = False, workers: Optional[int] = None) -> ReferenceResult:
    """Reference value of the configuration, from the cache when possible."""
    cfg.validate()
    ref = cfg.reference
    if ref is None:
        raise ConfigError("configuration has no reference")
    cache = cache if cache is not None else ReferenceCache()
    key = reference_key(cfg)
    if not rebuild:
        record = cache.get(key)
        if record is not None:
            return ReferenceResult(float.fromhex(record["value"]), key, True, 0, 0.0)
    workers = cfg.workers if workers is None else workers
    _check_assumptions(cfg, ref.s1, ref.s2)
    problem = build_problem(cfg.example, ref.J, ref.degree, ref.s1, ref.s2)
    t0 = time.perf_counter()
    if ref.mode == "tensor":
        fy, fz = _families(cfg, ref.s1, ref.s2)
        ec = EstimatorConfig(ref.s1, ref.s2, ref.J, ref.degree, cfg.p, cfg.q, mode="tensor",
                             m1=ref.m1, m2=ref.m2)
        est = tensor_estimate(ec, fy.points(ref.m1), fz.points(ref.m2),
                              problem.mean_functional, workers=workers)
    else:
        fam, order = _direct_family(cfg, ref.s1, ref.s2)
        ec = EstimatorConfig(ref.s1, ref.s2, ref.J, ref.degree, cfg.p, cfg.q, mode="direct", m=ref.m)
        est = direct_estimate(ec, fam.points(ref.m), problem.mean_functional, order, workers)
    wall = time.perf_counter() - t0
    cache.put(key, dict(value=float(est.value).hex(), value_repr=repr(float(est.value)),
                        n_solves=est.n_solves, reference=dataclasses.asdict(ref),
                        example=cfg.example, version=__version__))
    return ReferenceResult(float(est.value), key, False, est.n_solves, wall)


# ----------------------------------------------------------------------
# reports

def format_error(x: float) -> str:
    """Five significant digits in scientific notation, e.g. ``3.8533e-01``."""
    return f"{x:.4e}"


@dataclass
class ConvergenceReport:
    """Table of errors and rates plus run metadata.

    ``rows`` hold already-formatted cells so that the CSV is exactly what
    rates were computed from.
    """

    columns: list[str]
    rows: list[list[str]]
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        w.writerows(self.rows)
        return buf.getvalue()

    def write(self, path) -> Path:
        """Write the CSV and a ``.meta.json`` sidecar, each atomically.

        Wall times live in the sidecar so the CSV is byte-reproducible.
        """
        path = Path(path)
        _atomic_write(path, self.to_csv())
        _atomic_write(path.with_suffix(".meta.json"),
                      json.dumps(self.metadata, indent=1, sort_keys=True, default=str) + "\n")
        return path


def _rate_cells(errors: list[str]) -> list[str]:
    # rates from the emitted (rounded) errors, so they can be recomputed exactly
    rates = empirical_rate([float(e) for e in errors])
    return [""] + [repr(r) for r in rates]


def _error_table(first: str, err_col: str, xs: Sequence[int], errors: Sequence[float]):
    cells = [format_error(e) for e in errors]
    rates = _rate_cells(cells) if len(cells) > 1 else [""] * len(cells)
    return [first, err_col, "CR"], [[str(x), e, r] for x, e, r in zip(xs, cells, rates)]


def _run_fem(cfg: ExperimentConfig):
    u_exact, _ = example1_exact_and_forcing()
    l2, fun, times = [], [], []
    for J in cfg.J:
        t0 = time.perf_counter()
        problem = build_problem(1, J, cfg.degree)
        u_h = problem.solve()
        l2.append(l2_error_centroid(u_h, u_exact))
        fun.append(abs(functional_mean(u_h)))  # exact mean of u1 + u2 is zero
        times.append(time.perf_counter() - t0)
    e1 = [format_error(e) for e in l2]
    e2 = [format_error(e) for e in fun]
    r1 = _rate_cells(e1) if len(e1) > 1 else [""]
    r2 = _rate_cells(e2) if len(e2) > 1 else [""]
    rows = [[str(J), a, b, c, d] for J, a, b, c, d in zip(cfg.J, e1, r1, e2, r2)]
    cols = ["J", "||u-u_h||", "CR", "|L_1(u-u_h)|", "CR"]
    return cols, rows, dict(wall_times=times, values=dict(l2=l2, functional=fun))


def _run_qmc(cfg: ExperimentConfig, ref_value: float):
    J, r = cfg.J[0], cfg.degree
    _check_assumptions(cfg, cfg.s1, cfg.s2)
    problem = build_problem(cfg.example, J, r, cfg.s1, cfg.s2)
    F = problem.mean_functional
    values, times, solves, extra = [], [], [], {}
    if cfg.mode == "tensor":
        fy, fz = _families(cfg, cfg.s1, cfg.s2)
        for m in cfg.levels:
            m1, m2 = (m, 0) if cfg.vary == "y" else (0, m)
            ec = EstimatorConfig(cfg.s1, cfg.s2, J, r, cfg.p, cfg.q, mode="tensor", m1=m1, m2=m2)
            est = tensor_estimate(ec, fy.points(m1), fz.points(m2), F, workers=cfg.workers)
            values.append(est.value)
            times.append(est.wall_time)
            solves.append(est.n_solves)
        xs = [2 ** m for m in cfg.levels]
        first = "N_1" if cfg.vary == "y" else "N_2"
        cols, rows = _error_table(first, "|Xi_ref-Xi_Q|", xs, [abs(v - ref_value) for v in values])
    elif cfg.mode == "direct":
        fam, order = _direct_family(cfg, cfg.s1, cfg.s2)
        for m in cfg.levels:
            ec = EstimatorConfig(cfg.s1, cfg.s2, J, r, cfg.p, cfg.q, mode="direct", m=m)
            est = direct_estimate(ec, fam.points(m), F, order, workers=cfg.workers)
            values.append(est.value)
            times.append(est.wall_time)
            solves.append(est.n_solves)
        xs = [2 ** m for m in cfg.levels]
        cols, rows = _error_table("N", "|Xi_ref-Xi_Q_N|", xs, [abs(v - ref_value) for v in values])
    else:
        fy, fz = _families(cfg, cfg.s1, cfg.s2)
        grid_cache: dict = {}
        Ms, terms = [], {}
        for L in cfg.levels:
            ec = EstimatorConfig(cfg.s1, cfg.s2, J, r, cfg.p, cfg.q, cfg.theta, mode="sparse", L=L)
            est = sparse_estimate(ec, F, fy, fz, workers=cfg.workers, cache=grid_cache)
            values.append(est.value)
            times.append(est.wall_time)
            solves.append(est.n_solves)
            Ms.append(est.n_points)
            terms[L] = {f"{j},{k}": v for (j, k), v in est.terms.items()}
        extra["terms"] = terms
        cols = ["L", "M", "|Xi_Q_L-Xi_ref|", "(log M)M^-1"]
        rows = [[str(L), str(M), format_error(abs(v - ref_value)), format_error(math.log(M) / M)]
                for L, M, v in zip(cfg.levels, Ms, values)]
    meta = dict(wall_times=times, n_solves=solves, values=[repr(v) for v in values], **extra)
    return cols, rows, meta


def run_experiment(cfg: ExperimentConfig, cache: Optional[ReferenceCache] = None,
                   rebuild_reference: bool = False) -> ConvergenceReport:
    """Run a convergence study and return its report (nothing is written)."""
    cfg.validate()
    t0 = time.perf_counter()
    meta = dict(config=cfg.to_dict(), config_hash=cfg.digest(), version=__version__)
    if cfg.mode == "fem":
        cols, rows, extra = _run_fem(cfg)
    else:
        try:
            ref = build_reference(cfg, cache, rebuild_reference)
        except Exception as exc:
            raise RuntimeError(f"reference stage failed: {exc}") from exc
        meta["reference"] = dict(value=repr(ref.value), key=ref.key, cache_hit=ref.hit,
                                 n_solves=ref.n_solves)
        try:
            cols, rows, extra = _run_qmc(cfg, ref.value)
        except Exception as exc:
            raise RuntimeError(f"{cfg.mode} estimator stage failed: {exc}") from exc
    meta.update(extra)
    meta["total_wall_time"] = time.perf_counter() - t0
    return ConvergenceReport(cols, rows, meta)


def read_report(path) -> ConvergenceReport:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty report")
    return ConvergenceReport(rows[0], rows[1:])


def emit_plot_data(report: ConvergenceReport, path, slope: float = 2.0) -> Path:
    """Whitespace-delimited ``x error guide`` columns.

    The error column is the first one whose header starts with ``|`` and
    ``x`` is the ``M`` column when present (sparse grids), else the first;
    the guide is ``e_0 (x / x_0)^-slope`` through the first error.
    """
    if not report.rows:
        raise ValueError("report has no rows")
    try:
        k = next(i for i, c in enumerate(report.columns) if c.startswith("|"))
    except StopIteration:
        raise ValueError("report has no error column") from None
    xi = report.columns.index("M") if "M" in report.columns else 0
    xs = [float(r[xi]) for r in report.rows]
    es = [float(r[k]) for r in report.rows]
    name = report.columns[xi]
    lines = [f"# {name} error {name}^-{slope:g}"]
    for x, e in zip(xs, es):
        guide = es[0] * (x / xs[0]) ** (-slope)
        lines.append(f"{x:.17g} {e:.17g} {guide:.17g}")
    out = Path(path)
    _atomic_write(out, "\n".join(lines) + "\n")
    return out
