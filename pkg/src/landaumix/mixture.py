"""Species parameters, mixture configuration, Maxwellians and equilibrium moments.

Units: k_B is fixed to 1, temperatures are carried as kT throughout.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GammaOutOfRange, NonPositiveParameter, NonSymmetricInteraction, ZeroMass
from .fields import DistributionField

GAMMA_MIN = -2.0
GAMMA_MAX = 1.0


@dataclass(frozen=True)
class SpeciesParams:
    """One species: particle mass m_i and concentration rho_i."""

    mass: float
    density: float

    def __post_init__(self):
        if not (self.mass > 0 and np.isfinite(self.mass)):
            raise NonPositiveParameter(f"species mass must be positive, got {self.mass}")
        if not (self.density > 0 and np.isfinite(self.density)):
            raise NonPositiveParameter(f"species density must be positive, got {self.density}")


@dataclass(frozen=True)
class MixtureConfig:
    """Physical problem definition for an N-species mixture.

    Parameters
    ----------
    species : sequence of SpeciesParams
        Ordered species list, length N >= 1.
    gamma : float
        Potential exponent in phi(|z|) = |z|**(gamma + 2); admissible range [-2, 1].
    interaction : (N, N) array, optional
        Symmetric positive collision strengths C_ij.  Defaults to the reduced
        mass m_i m_j / (m_i + m_j).
    kT : float
        Reference temperature times Boltzmann constant (k_B = 1).
    drift : length-3 sequence
        Bulk velocity of the reference Maxwellians.
    """

    species: tuple[SpeciesParams, ...]
    gamma: float
    interaction: np.ndarray | None = None
    kT: float = 1.0
    drift: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        species = tuple(self.species)
        object.__setattr__(self, "species", species)
        object.__setattr__(self, "drift", tuple(float(d) for d in self.drift))
        inter = self.interaction
        if inter is None:
            inter = default_interaction(species)
        inter = np.asarray(inter, dtype=float)
        inter.setflags(write=False)
        object.__setattr__(self, "interaction", inter)
        validate_config(self)

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def masses(self) -> np.ndarray:
        return np.array([s.mass for s in self.species])

    @property
    def densities(self) -> np.ndarray:
        return np.array([s.density for s in self.species])

    def as_dict(self) -> dict:
        return {
            "masses": [s.mass for s in self.species],
            "densities": [s.density for s in self.species],
            "gamma": self.gamma,
            "interaction": np.asarray(self.interaction).tolist(),
            "kT": self.kT,
            "drift": list(self.drift),
        }


@dataclass(frozen=True)
class EquilibriumMoments:
    """Moments (rho_i, u, T) of the global Maxwellian fixed by the conservation laws."""

    densities: tuple[float, ...]
    bulk_velocity: tuple[float, float, float]
    temperature: float

    def __post_init__(self):
        if not (self.temperature > 0 and np.isfinite(self.temperature)):
            raise NonPositiveParameter(f"temperature must be positive, got {self.temperature}")
        object.__setattr__(self, "densities", tuple(float(r) for r in self.densities))
        object.__setattr__(self, "bulk_velocity", tuple(float(u) for u in self.bulk_velocity))


def mixture(masses: Sequence[float], densities: Sequence[float] | None = None,
            gamma: float = 0.0, interaction=None, kT: float = 1.0,
            drift: Sequence[float] = (0.0, 0.0, 0.0)) -> MixtureConfig:
    """Convenience constructor from plain arrays."""
    masses = list(masses)
    if densities is None:
        densities = [1.0] * len(masses)
    species = tuple(SpeciesParams(float(m), float(r)) for m, r in zip(masses, densities))
    return MixtureConfig(species=species, gamma=float(gamma), interaction=interaction,
                         kT=float(kT), drift=tuple(drift))


def validate_config(cfg: MixtureConfig) -> MixtureConfig:
    """Check all mixture invariants; return cfg unchanged if they hold."""
    if len(cfg.species) < 1:
        raise NonPositiveParameter("mixture needs at least one species")
    if not (GAMMA_MIN <= cfg.gamma <= GAMMA_MAX):
        raise GammaOutOfRange(f"gamma={cfg.gamma} outside [{GAMMA_MIN}, {GAMMA_MAX}]")
    if not (cfg.kT > 0 and np.isfinite(cfg.kT)):
        raise NonPositiveParameter(f"kT must be positive, got {cfg.kT}")
    inter = np.asarray(cfg.interaction, dtype=float)
    n = len(cfg.species)
    if inter.shape != (n, n):
        raise NonSymmetricInteraction(f"interaction must be {n}x{n}, got {inter.shape}")
    if not np.array_equal(inter, inter.T):
        raise NonSymmetricInteraction("interaction matrix must be symmetric")
    if not np.all(inter > 0):
        raise NonPositiveParameter("interaction entries must be positive")
    return cfg


def default_interaction(species: Sequence[SpeciesParams]) -> np.ndarray:
    """Reduced-mass interaction strengths C_ij = m_i m_j / (m_i + m_j)."""
    if len(species) == 0:
        raise NonPositiveParameter("species list is empty")
    m = np.array([s.mass for s in species])
    return np.outer(m, m) / (m[:, None] + m[None, :])


def maxwellian_values(mass: float, density: float, kT: float, drift, points: np.ndarray) -> np.ndarray:
    """Nodal values of rho/(2 pi m kT)^(3/2) * exp(-|p - m u|^2 / (2 m kT))."""
    u = np.asarray(drift, dtype=float)
    dp = points - mass * u
    norm = density / (2.0 * np.pi * mass * kT) ** 1.5
    return norm * np.exp(-0.5 * np.einsum("ak,ak->a", dp, dp) / (mass * kT))


def maxwellian_field(cfg: MixtureConfig, moments: EquilibriumMoments, grid) -> DistributionField:
    """Evaluate the Maxwellian family with the given moments on the grid."""
    values = np.stack([
        maxwellian_values(s.mass, rho, moments.temperature, moments.bulk_velocity, grid.points)
        for s, rho in zip(cfg.species, moments.densities)
    ])
    return DistributionField(values=values, kind="density")


def reference_maxwellian(cfg: MixtureConfig, grid) -> DistributionField:
    """Maxwellians at the configuration's own (rho_i, drift, kT)."""
    mom = EquilibriumMoments(densities=tuple(cfg.densities), bulk_velocity=cfg.drift,
                             temperature=cfg.kT)
    return maxwellian_field(cfg, mom, grid)


def discrete_equilibrium(F: DistributionField, cfg: MixtureConfig, grid,
                         tol: float = 1e-13, maxiter: int = 200) -> EquilibriumMoments:
    """Maxwellian parameters whose *discrete* moments match those of F exactly.

    The continuum formulas of equilibrium_moments leave quadrature-level
    mismatches on coarse grids; the conserved discrete flow then stalls at a
    nearby state.  This fixed-point solve adjusts (rho_i, u, T) until the
    quadrature mass, momentum and energy of the Maxwellian family agree with
    the conserved functionals of F to relative tolerance `tol`.
    """
    w = grid.weights
    pts = grid.points
    masses = cfg.masses
    p2 = np.einsum("ak,ak->a", pts, pts)

    target_mass = F.values @ w
    if np.any(target_mass <= 0):
        raise ZeroMass("species with non-positive quadrature mass")
    target_mom = np.einsum("ia,a,ak->k", F.values, w, pts)
    target_en = sum(float(np.dot(F.values[i], w * p2)) / (2.0 * m)
                    for i, m in enumerate(masses))

    start = equilibrium_moments(F, cfg, grid)
    rho = np.array(start.densities)
    u = np.array(start.bulk_velocity)
    T = start.temperature
    scale_en = max(abs(target_en), 1e-300)
    for _ in range(maxiter):
        M = np.stack([maxwellian_values(m, r, T, u, pts)
                      for m, r in zip(masses, rho)])
        mass = M @ w
        mom = np.einsum("ia,a,ak->k", M, w, pts)
        en = sum(float(np.dot(M[i], w * p2)) / (2.0 * m) for i, m in enumerate(masses))
        err = max(np.abs(mass / target_mass - 1.0).max(),
                  np.abs(mom - target_mom).max() / max(np.abs(target_mom).max(), scale_en ** 0.5),
                  abs(en - target_en) / scale_en)
        if err < tol:
            break
        rho = rho * (target_mass / mass)
        mtot = np.sum(rho * masses)
        u = u + (target_mom - mom) / mtot
        drift_en = 0.5 * np.sum(rho * masses) * float(np.dot(u, u))
        thermal = en - drift_en
        target_thermal = target_en - drift_en
        if thermal > 0 and target_thermal > 0:
            T = T * target_thermal / thermal
    return EquilibriumMoments(densities=tuple(rho), bulk_velocity=tuple(u),
                              temperature=float(T))


def equilibrium_moments(F: DistributionField, cfg: MixtureConfig, grid) -> EquilibriumMoments:
    """Moments (rho_i, u_inf, T_inf) of the global Maxwellian the flow conserves.

    u = sum_i int p F_i / sum_i rho_i m_i and
    T = sum_i int |p - m_i u|^2 / (3 m_i) F_i / sum_i rho_i  (k_B = 1).
    """
    w = grid.weights
    pts = grid.points
    masses = cfg.masses
    rho = F.values @ w
    if np.any(rho <= 0):
        bad = int(np.argmin(rho))
        raise ZeroMass(f"species {bad} has non-positive quadrature mass {rho[bad]}")
    momentum = np.einsum("ia,a,ak->k", F.values, w, pts)
    u = momentum / np.sum(rho * masses)
    kin = 0.0
    for i, m in enumerate(masses):
        d = pts - m * u
        kin += np.sum(F.values[i] * w * np.einsum("ak,ak->a", d, d)) / (3.0 * m)
    T = kin / np.sum(rho)
    return EquilibriumMoments(densities=tuple(rho), bulk_velocity=tuple(u), temperature=float(T))
