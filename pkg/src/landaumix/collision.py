"""Nonlinear Landau operators Q_ij, conserved moments, entropy, and the quadratic term.

Discretization notes.  The outer divergence is the exact quadrature adjoint
-D^T, so the mass of every Q_ij vanishes to roundoff.  The flux applies
discrete gradients to the ratio G = F / M_ref against a fixed reference
Maxwellian family: the pairwise cancellation A[z] z = 0 then annihilates any
Maxwellian family sharing the reference (u, T) exactly, and total momentum and
energy are conserved to roundoff because D is exact on p and |p|^2.  The form
is bilinear in (F_i, F_j) for a fixed reference.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NonPositiveDensity, ZeroRelativeVelocity
from .fields import DistributionField
from .grid import GridSpec, VelocityGrid, build_grid, discrete_gradient, integrate
from .mixture import MixtureConfig, maxwellian_values
from .pairsum import pair_aggregate

ENTROPY_FLOOR = 1e-30


@lru_cache(maxsize=8)
def _cached_gradient(spec: GridSpec):
    return discrete_gradient(build_grid(spec))


def gradient_for(grid: VelocityGrid):
    """Memoized discrete gradient for a grid."""
    return _cached_gradient(grid.spec)


@dataclass(frozen=True)
class MomentSet:
    """Conserved functionals: per-species mass, total momentum, total energy."""

    mass: np.ndarray        # (N,)
    momentum: np.ndarray    # (3,)
    energy: float


def a_kernel(z, C: float, gamma: float) -> np.ndarray:
    """Collision kernel C (I - z z^T/|z|^2) |z|^(gamma+2); requires z != 0."""
    z = np.asarray(z, dtype=float)
    z2 = float(np.dot(z, z))
    if z2 == 0.0:
        raise ZeroRelativeVelocity("a_kernel evaluated at z = 0")
    phi = C * z2 ** (0.5 * (gamma + 2.0))
    return phi * (np.eye(3) - np.outer(z, z) / z2)


def moments(F: DistributionField, cfg: MixtureConfig, grid: VelocityGrid) -> MomentSet:
    """Quadrature evaluation of mass_i, total momentum, and total energy."""
    w = grid.weights
    mass = F.values @ w
    momentum = np.einsum("ia,a,ak->k", F.values, w, grid.points)
    p2 = np.einsum("ak,ak->a", grid.points, grid.points)
    energy = sum(float(np.dot(F.values[i], w * p2)) / (2.0 * m)
                 for i, m in enumerate(cfg.masses))
    return MomentSet(mass=mass, momentum=momentum, energy=float(energy))


def _reference_unit_maxwellians(cfg: MixtureConfig, grid: VelocityGrid,
                                kT: float | None = None, drift=None) -> np.ndarray:
    kT = cfg.kT if kT is None else kT
    drift = cfg.drift if drift is None else drift
    return np.stack([maxwellian_values(s.mass, 1.0, kT, drift, grid.points)
                     for s in cfg.species])


def q_pair_many(Fi_stack: np.ndarray, Fj_stack: np.ndarray, i: int, j: int,
                cfg: MixtureConfig, grid: VelocityGrid, reference=None) -> np.ndarray:
    """Q_ij for a stack of field pairs; Fi_stack, Fj_stack have shape (S, G).

    `reference` optionally overrides the (kT, drift) of the preconditioning
    Maxwellians (an EquilibriumMoments or (kT, drift) tuple).
    """
    Fi_stack = np.atleast_2d(np.asarray(Fi_stack, dtype=float))
    Fj_stack = np.atleast_2d(np.asarray(Fj_stack, dtype=float))
    grad = gradient_for(grid)
    kT = drift = None
    if reference is not None:
        if hasattr(reference, "temperature"):
            kT, drift = reference.temperature, reference.bulk_velocity
        else:
            kT, drift = reference
    Mref = _reference_unit_maxwellians(cfg, grid, kT, drift)
    m = cfg.masses
    cij = float(cfg.interaction[i, j])
    w = grid.weights

    Gi = Fi_stack / Mref[i]
    Gj = Fj_stack / Mref[j]
    DGi = np.stack([grad.apply(g) for g in Gi])          # (S, G, 3)
    DGj = np.stack([grad.apply(g) for g in Gj])
    scalars = w * Fj_stack                                # (S, G)
    vectors = (w * Mref[j])[None, :, None] * DGj          # (S, G, 3)
    mats, vecs, _ = pair_aggregate(grid.points, grid.points, m[i], m[j],
                                   cij, cfg.gamma, scalars=scalars, vectors=vectors)
    out = np.empty_like(Fi_stack)
    for s in range(Fi_stack.shape[0]):
        flux = Mref[i][:, None] * (np.einsum("akl,al->ak", mats[s], DGi[s])
                                   - Gi[s][:, None] * vecs[s])
        out[s] = grad.divergence(flux)
    return out


def q_pair(F_i: np.ndarray, F_j: np.ndarray, i: int, j: int,
           cfg: MixtureConfig, grid: VelocityGrid, reference=None) -> np.ndarray:
    """Nodal values of Q_ij(F_i, F_j) for one pair of species fields."""
    return q_pair_many(F_i[None, :], F_j[None, :], i, j, cfg, grid, reference)[0]


def q_total(F: DistributionField, cfg: MixtureConfig, grid: VelocityGrid,
            reference=None) -> np.ndarray:
    """sum_j Q_ij(F_i, F_j) for every i; returns (N, G)."""
    N = cfg.n_species
    out = np.zeros_like(F.values)
    for i in range(N):
        for j in range(N):
            out[i] += q_pair_many(F.values[i][None], F.values[j][None], i, j,
                                  cfg, grid, reference)[0]
    return out


def entropy_and_production(F: DistributionField, cfg: MixtureConfig, grid: VelocityGrid,
                           floor: float | None = ENTROPY_FLOOR, with_scale: bool = False):
    """Boltzmann entropy H = sum_i int F_i log(F_i / m_i^3) and its production D >= 0.

    D is assembled in the symmetrized pairwise form, with log-gradients taken
    through the discrete gradient so that common-moment Maxwellian families
    (quadratic log) produce D = 0 to roundoff.  Nodes with F below `floor` are
    excluded from the logarithm; pass floor=None to make non-positive values an
    error instead.
    """
    vals = F.values
    if floor is None:
        if np.any(vals <= 0):
            raise NonPositiveDensity("entropy requested for non-positive field with flooring disabled")
        floor_eff = 0.0
        clipped = vals
        active = np.ones_like(vals, dtype=bool)
    else:
        floor_eff = floor
        active = vals >= floor_eff
        clipped = np.maximum(vals, floor_eff)

    w = grid.weights
    m3 = cfg.masses ** 3
    logs = np.log(clipped / m3[:, None])
    H = float(np.sum(np.where(active, vals * logs, 0.0) @ w))

    grad = gradient_for(grid)
    N = cfg.n_species
    xi = np.stack([grad.apply(np.log(clipped[i])) for i in range(N)])  # (N, G, 3)
    Fw = np.where(active, vals, 0.0) * w

    D = 0.0
    scale = 0.0
    for i in range(N):
        for j in range(N):
            cij = float(cfg.interaction[i, j])
            quads = np.einsum("bk,bl->bkl", xi[j], xi[j]) * Fw[j][:, None, None]
            quad_list = [quads]
            if with_scale:
                trq = (Fw[j] * np.einsum("bk,bk->b", xi[j], xi[j]))
                quad_list.append(trq[:, None, None] * np.eye(3)[None, :, :])
            mats, vecs, quadvals = pair_aggregate(
                grid.points, grid.points, cfg.masses[i], cfg.masses[j], cij, cfg.gamma,
                scalars=Fw[j][None], vectors=(Fw[j][:, None] * xi[j])[None],
                quads=np.stack(quad_list))
            own = np.einsum("ak,akl,al->a", xi[i], mats[0], xi[i])
            cross = np.einsum("ak,ak->a", xi[i], vecs[0])
            D += 0.5 * float(np.dot(Fw[i], own - 2.0 * cross + quadvals[0]))
            if with_scale:
                trmat = np.einsum("akk->a", mats[0])
                scale += 0.5 * float(np.dot(Fw[i],
                                            np.einsum("ak,ak->a", xi[i], xi[i]) * trmat
                                            + quadvals[1]))
    if with_scale:
        return H, D, scale
    return H, D


def gamma_bilinear(f: DistributionField, cfg: MixtureConfig, grid: VelocityGrid) -> np.ndarray:
    """Quadratic perturbation term Gamma_i(f, f) = M_i^{-1/2} sum_j Q_ij(sqrt(M_i) f_i, sqrt(M_j) f_j).

    Realized with the same preconditioned flux as q_pair, which keeps the
    expansion identity M^{-1/2} Q(M + sqrt(M) f) = L f + Gamma(f, f) exact at
    the discrete level.
    """
    N = cfg.n_species
    rho = cfg.densities
    M = np.stack([maxwellian_values(s.mass, r, cfg.kT, cfg.drift, grid.points)
                  for s, r in zip(cfg.species, rho)])
    sqrtM = np.sqrt(M)
    out = np.zeros_like(f.values)
    for i in range(N):
        for j in range(N):
            q = q_pair_many((sqrtM[i] * f.values[i])[None], (sqrtM[j] * f.values[j])[None],
                            i, j, cfg, grid)[0]
            out[i] += q / sqrtM[i]
    return out


def conservation_residuals(F: DistributionField, cfg: MixtureConfig, grid: VelocityGrid,
                           reference=None) -> dict:
    """Relative conservation defects of the discrete collision operator on F.

    Mass residuals are per ordered pair (i, j); momentum and energy residuals
    are for sum_ij Q_ij, normalized by the corresponding absolute-value
    quadrature scale.
    """
    N = cfg.n_species
    w = grid.weights
    pts = grid.points
    p2 = np.einsum("ak,ak->a", pts, pts)
    mass_rel = np.zeros((N, N))
    Qsum = np.zeros_like(F.values)
    for i in range(N):
        for j in range(N):
            Q = q_pair_many(F.values[i][None], F.values[j][None], i, j, cfg, grid,
                            reference)[0]
            scale = float(np.dot(np.abs(Q), w))
            mass_rel[i, j] = abs(float(np.dot(Q, w))) / scale if scale > 0 else 0.0
            Qsum[i] += Q
    mom = np.einsum("ia,a,ak->k", Qsum, w, pts)
    mom_scale = float(np.einsum("ia,a,a->", np.abs(Qsum), w, np.sqrt(p2)))
    energy = sum(float(np.dot(Qsum[i], w * p2)) / (2.0 * m) for i, m in enumerate(cfg.masses))
    en_scale = sum(float(np.dot(np.abs(Qsum[i]), w * p2)) / (2.0 * m)
                   for i, m in enumerate(cfg.masses))
    return {
        "mass_rel": mass_rel,
        "momentum_rel": float(np.linalg.norm(mom)) / mom_scale if mom_scale > 0 else 0.0,
        "energy_rel": abs(energy) / en_scale if en_scale > 0 else 0.0,
    }
