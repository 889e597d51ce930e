"""Truncated staggered momentum grid, quadrature, discrete gradient and Gram matrices.

The gradient uses centered interior stencils and one-sided 3-point boundary
stencils, all exact on polynomials of total degree <= 2.  Divergence-form
operators elsewhere apply -D^T, the exact quadrature adjoint, which is what
makes the collision invariants land exactly in the discrete kernels.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError


@dataclass(frozen=True)
class GridSpec:
    """Truncation parameters: n points per axis on [-radius, radius]^3."""

    points_per_axis: int
    radius: float

    def __post_init__(self):
        if self.points_per_axis < 4:
            raise ConfigError(f"points_per_axis must be >= 4, got {self.points_per_axis}")
        if not (self.radius > 0 and np.isfinite(self.radius)):
            raise ConfigError(f"radius must be positive, got {self.radius}")

    def as_dict(self) -> dict:
        return {"points_per_axis": self.points_per_axis, "radius": self.radius}


def default_radius(masses, kT: float, sigmas: float = 6.0) -> float:
    """Truncation radius covering `sigmas` thermal widths of the widest species."""
    return sigmas * float(np.sqrt(np.max(masses) * kT))


@dataclass(frozen=True)
class VelocityGrid:
    """Staggered product grid: axis values -R + (a + 1/2) h, so no node hits p = 0."""

    spec: GridSpec
    axis: np.ndarray        # (n,) per-axis coordinates
    points: np.ndarray      # (G, 3) lexicographic in (ix, iy, iz)
    weights: np.ndarray     # (G,) midpoint weights h^3
    spacing: float

    @property
    def n_nodes(self) -> int:
        return self.points.shape[0]

    @property
    def n_axis(self) -> int:
        return self.axis.size

    @property
    def radius(self) -> float:
        return self.spec.radius

    def bracket(self) -> np.ndarray:
        """<p> = sqrt(1 + |p|^2) at every node."""
        return np.sqrt(1.0 + np.einsum("ak,ak->a", self.points, self.points))


def build_grid(spec: GridSpec) -> VelocityGrid:
    n, R = spec.points_per_axis, spec.radius
    h = 2.0 * R / n
    axis = -R + (np.arange(n) + 0.5) * h
    X, Y, Z = np.meshgrid(axis, axis, axis, indexing="ij")
    points = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    weights = np.full(n ** 3, h ** 3)
    return VelocityGrid(spec=spec, axis=axis, points=points, weights=weights, spacing=h)


def _stencil_1d(n: int, h: float) -> sp.csr_array:
    # One-sided 3-point stencils throughout: forward on the left half-axis,
    # backward on the right.  Second-order, exact on quadratics, equivariant
    # under the grid reflection, and with null space = constants only.  A
    # centered interior stencil would leave checkerboard quasi-null modes
    # that contaminate the small end of the collision spectrum.
    rows, cols, vals = [], [], []
    for k in range(n):
        if k < n // 2:
            rows += [k, k, k]
            cols += [k, k + 1, k + 2]
            vals += [-1.5 / h, 2.0 / h, -0.5 / h]
        else:
            rows += [k, k, k]
            cols += [k, k - 1, k - 2]
            vals += [1.5 / h, -2.0 / h, 0.5 / h]
    return sp.csr_array((vals, (rows, cols)), shape=(n, n))


@dataclass(frozen=True)
class GradientOperator:
    """Sparse matrices D_x, D_y, D_z over lexicographic nodal vectors."""

    components: tuple
    grid: VelocityGrid = field(repr=False, default=None)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, k):
        return self.components[k]

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Gradient of nodal values; returns (..., 3) with components along the last axis."""
        return np.stack([Dk @ values for Dk in self.components], axis=-1)

    def divergence(self, flux: np.ndarray) -> np.ndarray:
        """Quadrature-adjoint divergence -sum_k D_k^T flux_k; flux shape (G, 3)."""
        out = -(self.components[0].T @ flux[:, 0])
        out -= self.components[1].T @ flux[:, 1]
        out -= self.components[2].T @ flux[:, 2]
        return out


def discrete_gradient(grid: VelocityGrid) -> GradientOperator:
    n = grid.n_axis
    D1 = _stencil_1d(n, grid.spacing)
    I = sp.identity(n, format="csr")
    Dx = sp.kron(sp.kron(D1, I), I, format="csr")
    Dy = sp.kron(sp.kron(I, D1), I, format="csr")
    Dz = sp.kron(sp.kron(I, I), D1, format="csr")
    return GradientOperator(components=(sp.csr_array(Dx), sp.csr_array(Dy), sp.csr_array(Dz)),
                            grid=grid)


def integrate(grid: VelocityGrid, nodal_values: np.ndarray) -> np.ndarray:
    """Quadrature sum_a w_a v_a over the last axis."""
    v = np.asarray(nodal_values)
    if not np.all(np.isfinite(v)):
        raise ValueError("integrand must be finite")
    return v @ grid.weights


@dataclass(frozen=True)
class GramMatrices:
    """L^2 and H quadratic forms over stacked species unknowns (NG x NG, sparse)."""

    l2: sp.csr_array
    h_norm: sp.csr_array
    n_species: int
    lower_equivalence: float  # c with h_norm >= c * l2 on the truncated grid

    def l2_dense(self) -> np.ndarray:
        return self.l2.toarray()

    def h_dense(self) -> np.ndarray:
        return self.h_norm.toarray()


def h_gram_single(grid: VelocityGrid, grad: GradientOperator, gamma: float) -> sp.csr_array:
    """G x G matrix of the anisotropic weighted form for one species.

    ||<p>^(g/2) P grad f||^2 + ||<p>^((g+2)/2) (I-P) grad f||^2 + ||<p>^((g+2)/2) f||^2
    with P = p p^T / |p|^2, evaluated nodewise (staggering keeps |p| > 0).
    """
    pts = grid.points
    w = grid.weights
    bk = grid.bracket()
    p2 = np.einsum("ak,ak->a", pts, pts)
    wg = bk ** gamma
    wg2 = bk ** (gamma + 2.0)
    out = sp.csr_array(sp.diags(w * wg2))
    for k in range(3):
        for l in range(3):
            P_kl = pts[:, k] * pts[:, l] / p2
            coeff = wg * P_kl + wg2 * ((1.0 if k == l else 0.0) - P_kl)
            out = out + sp.csr_array(grad[k].T @ sp.diags(w * coeff) @ grad[l])
    out = (out + out.T) * 0.5
    return sp.csr_array(out)


def gram_matrices(grid: VelocityGrid, cfg, grad: GradientOperator | None = None) -> GramMatrices:
    """Block-stacked L^2 and H Gram matrices for all species of cfg."""
    if grad is None:
        grad = discrete_gradient(grid)
    n_sp = cfg.n_species
    l2_single = sp.csr_array(sp.diags(grid.weights))
    h_single = h_gram_single(grid, grad, cfg.gamma)
    eye = sp.identity(n_sp, format="csr")
    l2 = sp.csr_array(sp.kron(eye, l2_single, format="csr"))
    h = sp.csr_array(sp.kron(eye, h_single, format="csr"))
    c = float(np.min(grid.bracket() ** (cfg.gamma + 2.0)))
    return GramMatrices(l2=l2, h_norm=h, n_species=n_sp, lower_equivalence=c)
