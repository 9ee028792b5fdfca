"""Galerkin P1/P2 discretisation of parametric linear elasticity.

For a realisation ``(y, z)`` the bilinear form is

    B(u, v) = int 2 mu eps(u):eps(v) + lambda div(u) div(v) dx

with homogeneous Dirichlet conditions on the boundary of the unit square.
:class:`ElasticityProblem` precomputes everything that does not depend on
the parameters, so a new realisation costs one small GEMM per element shape,
a scatter into a fixed CSR pattern and one sparse factorisation.
"""
from __future__ import annotations

import functools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coeff import ParametricField, constant_field
from .mesh import DofMap, Mesh, QuadratureRule, reference_basis, triangle_quadrature

__all__ = [
    "SolverError",
    "AssembledSystem",
    "DiscreteDisplacement",
    "ElasticityProblem",
    "assemble",
    "solve",
    "functional_mean",
    "l2_error_centroid",
    "energy_norm",
    "example1_exact_and_forcing",
    "example1_fields",
    "affine_load",
    "empirical_rate",
    "default_quadrature",
]

log = logging.getLogger(__name__)

VectorFn = Callable[[np.ndarray, np.ndarray], tuple]

DIRECT_MAX_J = 128


class SolverError(RuntimeError):
    pass


def default_quadrature(degree: int) -> QuadratureRule:
    return triangle_quadrature(4 if degree == 2 else 2)


@dataclass(frozen=True)
class AssembledSystem:
    stiffness: sp.csr_matrix = field(repr=False)
    load: np.ndarray = field(repr=False)
    y: np.ndarray
    z: np.ndarray
    degree: int
    dofmap: DofMap = field(repr=False)

    @property
    def n_dofs(self) -> int:
        return self.load.size


class DiscreteDisplacement:
    """A vector P1/P2 field given by its nodal values.

    ``coefficients`` are the free-dof values; ``nodal`` has shape
    (n_nodes, 2) and includes boundary nodes.
    """

    def __init__(self, dofmap: DofMap, nodal: np.ndarray):
        self.dofmap = dofmap
        self.nodal = np.asarray(nodal, dtype=float)
        if self.nodal.shape != (dofmap.n_nodes, 2):
            raise ValueError("nodal values must have shape (n_nodes, 2)")

    @property
    def degree(self) -> int:
        return self.dofmap.degree

    @property
    def coefficients(self) -> np.ndarray:
        return self.nodal[self.dofmap.free_nodes].ravel()

    @classmethod
    def from_coefficients(cls, dofmap: DofMap, coefficients: np.ndarray) -> "DiscreteDisplacement":
        nodal = np.zeros((dofmap.n_nodes, 2))
        nodal[dofmap.free_nodes] = np.asarray(coefficients, dtype=float).reshape(-1, 2)
        return cls(dofmap, nodal)

    @classmethod
    def interpolate(cls, dofmap: DofMap, func: VectorFn) -> "DiscreteDisplacement":
        """Nodal interpolant; boundary values are kept as given by ``func``."""
        x = dofmap.scalar_node_coords
        u1, u2 = func(x[:, 0], x[:, 1])
        nodal = np.column_stack([np.broadcast_to(u1, x[:, 0].shape),
                                 np.broadcast_to(u2, x[:, 0].shape)])
        return cls(dofmap, nodal)

    def evaluate_reference(self, xi: np.ndarray) -> np.ndarray:
        """Values at reference points ``xi`` of every cell, shape (n_cells, n_points, 2)."""
        phi, _ = reference_basis(self.degree, xi)
        local = self.nodal[self.dofmap.cell_nodes]  # (cells, n_local, 2)
        return np.einsum("qa,eac->eqc", phi, local)

    def at_centroids(self) -> np.ndarray:
        return self.evaluate_reference(np.array([[1.0 / 3.0, 1.0 / 3.0]]))[:, 0, :]


def _geometry(mesh: Mesh):
    p = mesh.vertices[mesh.triangles]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns are edges
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    return p[:, 0], jac, det


class ElasticityProblem:
    """Parameter-independent data for repeated assembly and solution.

    Parameters
    ----------
    mesh, dofmap : Mesh, DofMap
    mu_field, lambda_field : ParametricField
    f : callable
        Body force ``f(x1, x2) -> (f1, f2)``.
    quad : QuadratureRule, optional
        Stiffness quadrature; defaults to degree 4 for P2 and degree 2 for P1.
    load_quad : QuadratureRule, optional
        Load-vector quadrature; defaults to ``quad``.  The one-point rule
        amounts to replacing ``f`` by its cellwise centroid value.
    interpolate_coefficients : bool
        Replace mu and lambda (and every expansion term) by their P1 nodal
        interpolants on the mesh vertices before integrating.
    """

    def __init__(self, mesh: Mesh, dofmap: DofMap, mu_field: ParametricField,
                 lambda_field: ParametricField, f: VectorFn,
                 quad: Optional[QuadratureRule] = None,
                 load_quad: Optional[QuadratureRule] = None,
                 interpolate_coefficients: bool = False):
        self.mesh = mesh
        self.dofmap = dofmap
        self.mu_field = mu_field
        self.lambda_field = lambda_field
        self.quad = quad if quad is not None else default_quadrature(dofmap.degree)
        r = dofmap.degree
        if self.quad.exact_degree < 2 * (r - 1) + 1:
            warnings.warn(f"quadrature of degree {self.quad.exact_degree} under-integrates "
                          f"P{r} stiffness with variable coefficients", stacklevel=2)

        origin, jac, det = _geometry(mesh)
        if np.any(det <= 0.0):
            raise ValueError("mesh has degenerate or clockwise triangles")
        xi = self.quad.xi
        phi, dphi = reference_basis(r, xi)
        n_loc = phi.shape[1]
        self.n_local = n_loc

        # physical quadrature points and weights
        xq = origin[:, None, :] + np.einsum("eij,qj->eqi", jac, xi)
        self.xq = xq
        self.wq = det[:, None] * self.quad.weights[None, :]  # |K| * 2 * w_ref

        # element shapes: the uniform mesh has only two distinct Jacobians
        keys = np.round(jac.reshape(-1, 4) / mesh.h, 12)
        shapes, self._shape_of = np.unique(keys, axis=0, return_inverse=True)
        self._shape_of = self._shape_of.ravel()
        self._shape_cells = [np.flatnonzero(self._shape_of == k) for k in range(len(shapes))]
        self._a_mu, self._a_lam = [], []
        for cells in self._shape_cells:
            e = cells[0]
            inv = np.linalg.inv(jac[e])
            grad = dphi @ inv  # (Q, n_loc, 2)
            w = det[e] * self.quad.weights
            self._a_mu.append(self._mu_kernel(grad, w))
            self._a_lam.append(self._lambda_kernel(grad, w))

        # free-free scatter into a fixed CSR pattern
        cdofs = dofmap.cell_dofs().reshape(mesh.n_triangles, 2 * n_loc)
        rows = np.repeat(cdofs, 2 * n_loc, axis=1).ravel()
        cols = np.tile(cdofs, (1, 2 * n_loc)).ravel()
        keep = (rows >= 0) & (cols >= 0)
        self._keep = keep
        n = dofmap.total_free_dofs
        key = rows[keep] * n + cols[keep]
        uniq, self._slot = np.unique(key, return_inverse=True)
        self._indptr = np.searchsorted(uniq // n, np.arange(n + 1)).astype(np.int32)
        self._indices = (uniq % n).astype(np.int32)
        self._nnz = uniq.size
        self.n_dofs = n

        # coefficient data at quadrature points
        self.interpolate_coefficients = bool(interpolate_coefficients)
        shape = xq.shape[:2]
        self._mu0 = self._sample(mu_field.base_values).reshape(shape)
        self._lam0 = self._sample(lambda_field.base_values).reshape(shape)
        self._psi = self._sample(mu_field.term_matrix, mu_field.s)
        self._phi_terms = self._sample(lambda_field.term_matrix, lambda_field.s)

        self.load_quad = load_quad if load_quad is not None else self.quad
        self.load = self._assemble_load(f, self.load_quad)
        self.functional_weights = self._centroid_functional_weights()
        self._phi_ref = phi

    def _sample(self, g, s: Optional[int] = None) -> np.ndarray:
        """``g`` at all quadrature points, flattened to (n_cells * n_quad, ...)."""
        if s == 0:
            return np.zeros((self.xq.shape[0] * self.xq.shape[1], 0))
        if not self.interpolate_coefficients:
            return g(self.xq[..., 0].ravel(), self.xq[..., 1].ravel())
        v = self.mesh.vertices
        nodal = np.asarray(g(v[:, 0], v[:, 1]))
        # barycentric quadrature coordinates are the P1 basis values
        out = np.einsum("qa,ea...->eq...", self.quad.points, nodal[self.mesh.triangles])
        return out.reshape((-1,) + nodal.shape[1:])

    @staticmethod
    def _mu_kernel(grad: np.ndarray, w: np.ndarray) -> np.ndarray:
        # (delta_cd G_a.G_b + G_a[d] G_b[c]) per quadrature point, dofs (a, c)
        Q, n, _ = grad.shape
        dot = np.einsum("qak,qbk->qab", grad, grad)
        out = np.einsum("qad,qbc->qacbd", grad, grad)
        for c in range(2):
            out[:, :, c, :, c] += dot
        out *= w[:, None, None, None, None]
        return out.reshape(Q, 4 * n * n)

    @staticmethod
    def _lambda_kernel(grad: np.ndarray, w: np.ndarray) -> np.ndarray:
        Q, n, _ = grad.shape
        out = np.einsum("qac,qbd->qacbd", grad, grad)
        out *= w[:, None, None, None, None]
        return out.reshape(Q, 4 * n * n)

    def _assemble_load(self, f: VectorFn, quad: QuadratureRule) -> np.ndarray:
        phi, _ = reference_basis(self.dofmap.degree, quad.xi)
        origin, jac, det = _geometry(self.mesh)
        xq = origin[:, None, :] + np.einsum("eij,qj->eqi", jac, quad.xi)
        wq = det[:, None] * quad.weights[None, :]
        x1, x2 = xq[..., 0], xq[..., 1]
        f1, f2 = f(x1, x2)
        fq = np.stack([np.broadcast_to(f1, x1.shape), np.broadcast_to(f2, x1.shape)], axis=-1)
        local = np.einsum("eq,qa,eqc->eac", wq, phi, fq).reshape(-1)
        dofs = self.dofmap.cell_dofs().reshape(-1)
        ok = dofs >= 0
        return np.bincount(dofs[ok], weights=local[ok], minlength=self.n_dofs)

    def _centroid_functional_weights(self) -> np.ndarray:
        """Vector ``c`` with ``c @ coefficients`` = centroid rule for int (u1 + u2)."""
        phi_c, _ = reference_basis(self.dofmap.degree, np.array([[1.0 / 3.0, 1.0 / 3.0]]))
        area = 0.5 * (self.wq.sum(axis=1) / self.quad.weights.sum())  # = |K|
        local = (area[:, None] * phi_c[0][None, :])[:, :, None].repeat(2, axis=2).reshape(-1)
        dofs = self.dofmap.cell_dofs().reshape(-1)
        ok = dofs >= 0
        return np.bincount(dofs[ok], weights=local[ok], minlength=self.n_dofs)

    # ------------------------------------------------------------------
    def coefficient_values(self, y=(), z=()) -> tuple[np.ndarray, np.ndarray]:
        """mu and lambda at all quadrature points, shape (n_cells, n_quad)."""
        y = np.asarray(y, dtype=float).ravel()
        z = np.asarray(z, dtype=float).ravel()
        if y.size > self.mu_field.s or z.size > self.lambda_field.s:
            raise ValueError("more parameters than the truncation dimension")
        if np.any(np.abs(y) > 0.5) or np.any(np.abs(z) > 0.5):
            raise ValueError("parameters must lie in [-1/2, 1/2]")
        mu = self._mu0
        if y.size:
            mu = mu + (self._psi[:, :y.size] @ y).reshape(mu.shape)
        lam = self._lam0
        if z.size:
            lam = lam + (self._phi_terms[:, :z.size] @ z).reshape(lam.shape)
        return mu, lam

    def local_matrices(self, mu: np.ndarray, lam: np.ndarray) -> np.ndarray:
        n2 = (2 * self.n_local) ** 2
        out = np.empty((self.mesh.n_triangles, n2))
        for cells, a_mu, a_lam in zip(self._shape_cells, self._a_mu, self._a_lam):
            out[cells] = mu[cells] @ a_mu + lam[cells] @ a_lam
        m = 2 * self.n_local
        out = out.reshape(-1, m, m)
        out = 0.5 * (out + out.transpose(0, 2, 1))  # bitwise symmetric
        return out

    def stiffness_from_values(self, mu: np.ndarray, lam: np.ndarray) -> sp.csr_matrix:
        if np.any(mu <= 0.0):
            raise SolverError("mu is not positive at some quadrature point; assembly is singular")
        local = self.local_matrices(mu, lam).reshape(-1)[self._keep]
        data = np.bincount(self._slot, weights=local, minlength=self._nnz)
        return sp.csr_matrix((data, self._indices.copy(), self._indptr.copy()),
                             shape=(self.n_dofs, self.n_dofs))

    def assemble(self, y=(), z=()) -> AssembledSystem:
        mu, lam = self.coefficient_values(y, z)
        A = self.stiffness_from_values(mu, lam)
        return AssembledSystem(A, self.load, np.asarray(y, float), np.asarray(z, float),
                               self.dofmap.degree, self.dofmap)

    def solve(self, y=(), z=(), tol: float = 1e-12) -> DiscreteDisplacement:
        return solve(self.assemble(y, z), tol=tol)

    def mean_functional(self, y=(), z=(), tol: float = 1e-12) -> float:
        """Centroid-rule value of int (u1 + u2) for the realisation ``(y, z)``."""
        c = solve_coefficients(self.assemble(y, z), tol=tol)
        return float(self.functional_weights @ c)


def assemble(mesh: Mesh, dofmap: DofMap, mu_field: ParametricField,
             lambda_field: ParametricField, y, z, f: VectorFn,
             quad: Optional[QuadratureRule] = None, **options) -> AssembledSystem:
    """One-shot assembly; use :class:`ElasticityProblem` for many realisations."""
    return ElasticityProblem(mesh, dofmap, mu_field, lambda_field, f, quad,
                             **options).assemble(y, z)


@functools.lru_cache(maxsize=16)
def _nested_dissection(degree: int, J: int, leaf: int = 2) -> np.ndarray:
    """Fill-reducing dof ordering from geometric bisection of the node grid.

    The dof graph of a structured mesh is fixed, so the ordering is computed
    once per ``(degree, J)`` and the factorisation runs with the natural
    column order of the permuted matrix.
    """
    n = degree * J + 1
    ii, jj = np.divmod(np.arange(n * n), n)
    interior = (ii > 0) & (ii < n - 1) & (jj > 0) & (jj < n - 1)
    row, col = ii[interior], jj[interior]

    def bisect(sel: np.ndarray) -> list:
        if sel.size <= leaf:
            return [sel]
        r, c = row[sel], col[sel]
        coord = c if np.ptp(c) >= np.ptp(r) else r
        mid = np.sort(coord)[coord.size // 2]
        lo, hi = sel[coord < mid], sel[coord > mid]
        if lo.size == 0 or hi.size == 0:
            return [sel]
        # separator last so its fill is confined to the final dense block
        return bisect(lo) + bisect(hi) + [sel[coord == mid]]

    nodes = np.concatenate(bisect(np.arange(row.size)))
    return np.stack([2 * nodes, 2 * nodes + 1], axis=1).ravel()


def _relative_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return float(np.linalg.norm(A @ x))
    return float(np.linalg.norm(A @ x - b) / nb)


def solve_coefficients(system: AssembledSystem, tol: float = 1e-12,
                       method: str = "auto") -> np.ndarray:
    A, b = system.stiffness, system.load
    if not np.any(b):
        return np.zeros_like(b)
    if method == "auto":
        method = "direct" if system.dofmap.mesh.J <= DIRECT_MAX_J else "cg"
    if method == "direct":
        perm = _nested_dissection(system.degree, system.dofmap.mesh.J)
        Ap = A[perm][:, perm].tocsc()
        try:
            lu = spla.splu(Ap, permc_spec="NATURAL", options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise SolverError(f"factorisation failed: {exc}") from exc
        bp = b[perm]
        xp = lu.solve(bp)
        for _ in range(3):
            if _relative_residual(Ap, xp, bp) <= tol:
                break
            xp = xp + lu.solve(bp - Ap @ xp)
        x = np.empty_like(xp)
        x[perm] = xp
    elif method == "cg":
        d = A.diagonal()
        if np.any(d <= 0.0):
            raise SolverError("stiffness has a non-positive diagonal entry")
        M = sp.diags(1.0 / d)
        maxiter = 20 * A.shape[0]
        x, info = spla.cg(A, b, rtol=tol, atol=0.0, M=M, maxiter=maxiter)
        if info != 0:
            ratio = d.max() / d.min()
            raise SolverError(f"CG did not converge in {maxiter} iterations "
                              f"(diagonal ratio {ratio:.3e}, n={A.shape[0]})")
    else:
        raise ValueError(f"unknown solver method {method!r}")
    res = _relative_residual(A, x, b)
    if res > tol:
        raise SolverError(f"relative residual {res:.3e} exceeds tolerance {tol:.1e}")
    return x


def solve(system: AssembledSystem, tol: float = 1e-12, method: str = "auto") -> DiscreteDisplacement:
    """Solve the assembled system to relative residual ``tol``."""
    x = solve_coefficients(system, tol=tol, method=method)
    return DiscreteDisplacement.from_coefficients(system.dofmap, x)


def functional_mean(u_h: DiscreteDisplacement, quad: Optional[QuadratureRule] = None) -> float:
    """Approximate ``int_Omega (v1 + v2) dx``; the centroid rule by default."""
    quad = quad if quad is not None else triangle_quadrature(1)
    mesh = u_h.dofmap.mesh
    area = mesh.signed_areas()
    vals = u_h.evaluate_reference(quad.xi).sum(axis=2)  # (cells, Q)
    per_cell = vals @ (quad.weights / quad.weights.sum())
    return float(area @ per_cell)


def l2_error_centroid(u_h: DiscreteDisplacement, u_exact: VectorFn) -> float:
    mesh = u_h.dofmap.mesh
    c = mesh.centroids()
    e1, e2 = u_exact(c[:, 0], c[:, 1])
    diff = u_h.at_centroids() - np.column_stack([e1, e2])
    return float(np.sqrt(mesh.signed_areas() @ (diff ** 2).sum(axis=1)))


def energy_norm(u_h: DiscreteDisplacement) -> float:
    """``||grad u_h||_{L^2}`` (the V-norm up to the Poincare constant)."""
    mesh = u_h.dofmap.mesh
    quad = triangle_quadrature(2)
    _, dphi = reference_basis(u_h.degree, quad.xi)
    _, jac, det = _geometry(mesh)
    inv = np.linalg.inv(jac)
    grad = np.einsum("qak,ekj->eqaj", dphi, inv)
    local = u_h.nodal[u_h.dofmap.cell_nodes]  # (e, a, c)
    du = np.einsum("eqaj,eac->eqcj", grad, local)
    w = det[:, None] * quad.weights[None, :]
    return float(np.sqrt(np.einsum("eq,eqcj->", w, du ** 2)))


def example1_fields() -> tuple[ParametricField, ParametricField]:
    """Deterministic coefficients mu = x1 + x2 + 1, lambda = sin(2 pi x1) + 2."""
    mu = ParametricField(base=lambda x1, x2: x1 + x2 + 1.0, name="mu")
    lam = ParametricField(base=lambda x1, x2: np.sin(2 * np.pi * x1) + 2.0 + 0.0 * x2,
                          name="lambda")
    return mu, lam


def example1_exact_and_forcing() -> tuple[VectorFn, VectorFn]:
    """Manufactured solution and the body force ``f = -div sigma(u)``.

    u1 = 2 (cos 2 pi x1 - 1) sin 2 pi x2,  u2 = (1 - cos 2 pi x2) sin 2 pi x1,
    with mu = x1 + x2 + 1 and lambda = sin 2 pi x1 + 2.
    """
    P = 2.0 * np.pi

    def u_exact(x1, x2):
        return (2.0 * (np.cos(P * x1) - 1.0) * np.sin(P * x2),
                (1.0 - np.cos(P * x2)) * np.sin(P * x1))

    def forcing(x1, x2):
        s1, c1, s2, c2 = np.sin(P * x1), np.cos(P * x1), np.sin(P * x2), np.cos(P * x2)
        mu = x1 + x2 + 1.0
        lam = s1 + 2.0
        lam_x = P * c1
        # first and second derivatives of u
        u1_x = -2.0 * P * s1 * s2
        u1_y = 2.0 * P * (c1 - 1.0) * c2
        u2_x = P * (1.0 - c2) * c1
        u2_y = P * s2 * s1
        u1_xx = -2.0 * P * P * c1 * s2
        u1_xy = -2.0 * P * P * s1 * c2
        u1_yy = -2.0 * P * P * (c1 - 1.0) * s2
        u2_xx = -P * P * (1.0 - c2) * s1
        u2_xy = P * P * s2 * c1
        u2_yy = P * P * c2 * s1
        div = u1_x + u2_y
        div_x = u1_xx + u2_xy
        div_y = u1_xy + u2_yy
        shear = u1_y + u2_x
        # mu_x = mu_y = 1, lambda_y = 0
        ds11_dx = lam_x * div + lam * div_x + 2.0 * u1_x + 2.0 * mu * u1_xx
        ds12_dy = shear + mu * (u1_yy + u2_xy)
        ds12_dx = shear + mu * (u1_xy + u2_xx)
        ds22_dy = lam * div_y + 2.0 * u2_y + 2.0 * mu * u2_yy
        return -(ds11_dx + ds12_dy), -(ds12_dx + ds22_dy)

    return u_exact, forcing


def affine_load(x1, x2):
    """Body force (2 x1 + 10, x2 - 3) used by the random-coefficient examples."""
    return 2.0 * x1 + 10.0, x2 - 3.0


def empirical_rate(errors: Sequence[float]) -> list[float]:
    """``log2(e_{i-1} / e_i)`` for errors recorded at halving resolutions."""
    e = [float(v) for v in errors]
    if len(e) < 2:
        raise ValueError("need at least two errors to form a rate")
    if any(not v > 0.0 for v in e):
        raise ValueError("errors must be positive")
    return [math.log2(a / b) for a, b in zip(e[:-1], e[1:])]
