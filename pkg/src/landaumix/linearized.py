"""Linearized collision operator: Galerkin assembly, kernel bases, K/Lambda split.

The quadratic form is assembled in the symmetrized pairwise shape

    -(f, L f) = 1/2 sum_ij sum_ab w_a w_b M_i(a) M_j(b) d . A[z_ab] d,
    d = (D (f_i/sqrt(M_i)))(a) - (D (f_j/sqrt(M_j)))(b),

with the discrete gradient D; kernel functions sqrt(M) * (quadratic in p) are
annihilated exactly because D is exact on quadratics and A[z] z = 0.  The
Maxwellians are kept inside the pair tensor and the 1/sqrt(M) conjugation is
applied as an outer diagonal similarity (it does not commute with D).  Far-tail
Maxwellians are floored at the smallest normal double before inversion; this
keeps mass ratios up to ~13 per thermal width free of overflow.

Stacked vectors are species-major, node-lexicographic, length NG.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .collision import gradient_for
from .errors import RankDeficient, ZeroRelativeVelocity
from .grid import GridSpec, VelocityGrid
from .mixture import MixtureConfig, maxwellian_values
from .pairsum import radial_kernels

SELECTORS = ("full", "mono", "bi")


@dataclass
class OperatorMatrix:
    """Symmetric matrix of a quadratic form over stacked species unknowns."""

    matrix: np.ndarray
    tag: str
    grid_spec: GridSpec
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.matrix.shape

    def dense(self) -> np.ndarray:
        if sp.issparse(self.matrix):
            return self.matrix.toarray()
        return self.matrix


@dataclass
class KernelBasis:
    """L^2-Gram-orthonormal spanning set of a discrete null space."""

    vectors: np.ndarray   # (NG, k)
    kind: str             # "mono" (5N columns) or "full" (N+4 columns)
    n_species: int

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _pairs_for(selector: str, n: int):
    if selector == "mono":
        return [(i, i) for i in range(n)]
    if selector == "bi":
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    if selector == "full":
        return [(i, j) for i in range(n) for j in range(i, n)]
    raise ValueError(f"selector must be one of {SELECTORS}, got {selector!r}")


def _species_maxwellians(cfg: MixtureConfig, grid: VelocityGrid) -> np.ndarray:
    return np.stack([maxwellian_values(s.mass, s.density, cfg.kT, cfg.drift, grid.points)
                     for s in cfg.species])


def _inv_sqrt_floored(M_species: np.ndarray) -> np.ndarray:
    tiny = np.finfo(float).tiny
    return 1.0 / np.sqrt(np.maximum(M_species, tiny))


def _assemble_forms(cfg: MixtureConfig, grid: VelocityGrid, selector: str,
                    chunk: int | None = None):
    """Dense -L matrix plus the Lambda weight fields for the selected pair set.

    Returns (negL (NG, NG), lam_weights (N, G, 3, 3)) where lam_weights[i][a]
    = sum over selected j of sum_b w_b M_j(b) A_kl[z_ab^{(ij)}].
    """
    grad = gradient_for(grid)
    D = list(grad.components)
    G = grid.n_nodes
    N = cfg.n_species
    w = grid.weights
    masses = cfg.masses
    M = _species_maxwellians(cfg, grid)
    inv_sqrtM = np.stack([_inv_sqrt_floored(M[i]) for i in range(N)])
    pts = grid.points

    if chunk is None:
        chunk = max(16, int(1_500_000 // max(G, 1)) or 16)

    negL = np.zeros((N * G, N * G))
    lamw = np.zeros((N, G, 3, 3))

    for (i, j) in _pairs_for(selector, N):
        cij = float(cfg.interaction[i, j])
        qa = pts / masses[i]
        qb = pts / masses[j]
        wMj = w * M[j]
        wMi = w * M[i]
        block = negL[i * G:(i + 1) * G, j * G:(j + 1) * G]
        for start in range(0, G, chunk):
            stop = min(start + chunk, G)
            rows = slice(start, stop)
            Phi, R, zc = radial_kernels(qa[rows], qb, cij, cfg.gamma, with_z=True)
            Dstack_rows = sp.vstack([Dk[rows] for Dk in D], format="csr")
            Z_parts = []
            for k in range(3):
                Zk = None
                for l in range(3):
                    A = -R * (zc[k] * zc[l])
                    if k == l:
                        A += Phi
                    lamw[i, rows, k, l] += A @ wMj
                    if i != j:
                        lamw[j, :, k, l] += wMi[rows] @ A
                    B = (wMi[rows, None] * A) * wMj[None, :]
                    part = B @ D[l]
                    Zk = part if Zk is None else Zk + part
                Z_parts.append(Zk)
            Zstack = np.vstack(Z_parts)
            block -= (Dstack_rows.T @ Zstack)
        # conjugation by diag(1/sqrt(M)) on both sides
        block *= inv_sqrtM[i][:, None]
        block *= inv_sqrtM[j][None, :]
        if i != j:
            negL[j * G:(j + 1) * G, i * G:(i + 1) * G] = block.T

    for i in range(N):
        lam_i = _lambda_block(lamw[i], w * M[i], inv_sqrtM[i], D)
        negL[i * G:(i + 1) * G, i * G:(i + 1) * G] += lam_i.toarray()
    return negL, lamw


def _lambda_block(weight_field: np.ndarray, wM: np.ndarray, inv_sqrtM: np.ndarray,
                  D) -> sp.csr_array:
    """diag(1/sqrt(M)) [sum_kl D_k^T diag(w M W_kl) D_l] diag(1/sqrt(M)) for one species."""
    out = None
    for k in range(3):
        for l in range(3):
            term = sp.csr_array(D[k].T @ sp.diags(wM * weight_field[:, k, l]) @ D[l])
            out = term if out is None else out + term
    S = sp.diags(inv_sqrtM)
    out = sp.csr_array(S @ out @ S)
    out = (out + out.T) * 0.5
    return sp.csr_array(out)


def assemble_negL(selector: str, cfg: MixtureConfig, grid: VelocityGrid) -> OperatorMatrix:
    """Galerkin matrix of -(f, L f) for the selected pair set (full, mono or bi)."""
    negL, _ = _assemble_forms(cfg, grid, selector)
    negL = 0.5 * (negL + negL.T)
    return OperatorMatrix(matrix=negL, tag=f"negL_{selector}", grid_spec=grid.spec,
                          meta={"selector": selector, "mixture": cfg.as_dict()})


def lambda_from_weights(cfg: MixtureConfig, grid: VelocityGrid,
                        lamw: np.ndarray) -> sp.csr_array:
    """Sparse Lambda form from precomputed weight fields."""
    grad = gradient_for(grid)
    M = _species_maxwellians(cfg, grid)
    blocks = [_lambda_block(lamw[i], grid.weights * M[i], _inv_sqrt_floored(M[i]),
                            list(grad.components))
              for i in range(cfg.n_species)]
    return sp.csr_array(sp.block_diag(blocks, format="csr"))


def lambda_sparse(cfg: MixtureConfig, grid: VelocityGrid) -> sp.csr_array:
    """Sparse Lambda form (the i-diagonal gradient part of the K/Lambda split)."""
    _, lamw = _assemble_forms(cfg, grid, "full")
    return lambda_from_weights(cfg, grid, lamw)


def assemble_K_Lambda(cfg: MixtureConfig, grid: VelocityGrid):
    """Split -L = Lambda - K with Lambda the coercive gradient part.

    K is recovered as Lambda - (-L), which keeps L = K - Lambda exact at the
    discrete level; the analytic-kernel assembly (k_kernel_matrix) is an
    independent validation path.
    """
    negL, lamw = _assemble_forms(cfg, grid, "full")
    negL = 0.5 * (negL + negL.T)
    Lam = lambda_from_weights(cfg, grid, lamw).toarray()
    K = Lam - negL
    meta = {"mixture": cfg.as_dict()}
    return (OperatorMatrix(matrix=K, tag="K", grid_spec=grid.spec, meta=meta),
            OperatorMatrix(matrix=Lam, tag="Lambda", grid_spec=grid.spec, meta=meta))


def raw_kernel_columns(kind: str, cfg: MixtureConfig, grid: VelocityGrid) -> np.ndarray:
    """Unorthonormalized spanning functions of N(L^m) (kind=mono) or N(L) (kind=full)."""
    N = cfg.n_species
    G = grid.n_nodes
    pts = grid.points
    sqrtM = np.sqrt(_species_maxwellians(cfg, grid))
    p2 = np.einsum("ak,ak->a", pts, pts)
    masses = cfg.masses
    cols = []
    if kind == "mono":
        for i in range(N):
            for gfun in (np.ones(G), pts[:, 0], pts[:, 1], pts[:, 2], p2 / (2.0 * masses[i])):
                v = np.zeros(N * G)
                v[i * G:(i + 1) * G] = sqrtM[i] * gfun
                cols.append(v)
    elif kind == "full":
        for i in range(N):
            v = np.zeros(N * G)
            v[i * G:(i + 1) * G] = sqrtM[i]
            cols.append(v)
        for k in range(3):
            cols.append(np.concatenate([sqrtM[i] * pts[:, k] for i in range(N)]))
        cols.append(np.concatenate([sqrtM[i] * p2 / (2.0 * masses[i]) for i in range(N)]))
    else:
        raise ValueError(f"kind must be 'mono' or 'full', got {kind!r}")
    return np.column_stack(cols)


def kernel_basis(kind: str, cfg: MixtureConfig, grid: VelocityGrid,
                 tol: float = 1e-12) -> KernelBasis:
    """Gram-orthonormal basis of the discrete null space (modified Gram-Schmidt)."""
    raw = raw_kernel_columns(kind, cfg, grid)
    wfull = np.tile(grid.weights, cfg.n_species)
    V = np.empty_like(raw)
    have = 0
    for c in range(raw.shape[1]):
        v = raw[:, c].copy()
        norm0 = np.sqrt(np.dot(v, wfull * v))
        for _ in range(2):
            if have:
                v -= V[:, :have] @ (V[:, :have].T @ (wfull * v))
        nrm = np.sqrt(np.dot(v, wfull * v))
        if nrm < tol * max(norm0, 1.0):
            raise RankDeficient(
                f"kernel column {c} lost rank (norm ratio {nrm / max(norm0, 1e-300):.2e}); grid too coarse")
        V[:, have] = v / nrm
        have += 1
    return KernelBasis(vectors=V, kind=kind, n_species=cfg.n_species)


def project(basis: KernelBasis, f: np.ndarray, grid: VelocityGrid):
    """L^2-orthogonal projection of a stacked vector onto span(basis).

    Returns (f_parallel, coefficients).
    """
    f = np.asarray(f, dtype=float).reshape(-1)
    wfull = np.tile(grid.weights, basis.n_species)
    coeffs = basis.vectors.T @ (wfull * f)
    return basis.vectors @ coeffs, coeffs


def mono_coefficients(cfg: MixtureConfig, grid: VelocityGrid, f: np.ndarray):
    """Coefficients (alpha_i, u_i, e_i) of Pi^m f in the representation
    f_i = sqrt(M_i) (alpha_i + u_i . p + e_i |p|^2 / (2 m_i)).
    """
    N = cfg.n_species
    G = grid.n_nodes
    f = np.asarray(f, dtype=float).reshape(N, G)
    pts = grid.points
    p2 = np.einsum("ak,ak->a", pts, pts)
    sqrtM = np.sqrt(_species_maxwellians(cfg, grid))
    w = grid.weights
    alpha = np.zeros(N)
    u = np.zeros((N, 3))
    e = np.zeros(N)
    for i in range(N):
        basis_i = np.column_stack([
            sqrtM[i], sqrtM[i] * pts[:, 0], sqrtM[i] * pts[:, 1], sqrtM[i] * pts[:, 2],
            sqrtM[i] * p2 / (2.0 * cfg.masses[i])])
        gram = basis_i.T @ (w[:, None] * basis_i)
        rhs = basis_i.T @ (w * f[i])
        c = np.linalg.solve(gram, rhs)
        alpha[i], u[i], e[i] = c[0], c[1:4], c[4]
    return alpha, u, e


def apply_negL(negL: np.ndarray, grid: VelocityGrid, f: np.ndarray) -> np.ndarray:
    """Nodal operator action (-L f) from the Galerkin matrix: W^{-1} negL f."""
    f = np.asarray(f, dtype=float).reshape(-1)
    n_sp = negL.shape[0] // grid.n_nodes
    winv = 1.0 / np.tile(grid.weights, n_sp)
    return winv * (negL @ f)


def k_kernel_entry(p, pprime, i: int, j: int, cfg: MixtureConfig) -> float:
    """Pointwise integral kernel k^{(ij)}(p, p') of the compact part K.

    Evaluated analytically: with pt = p - m_i u, pt' = p' - m_j u and
    z = p/m_i - p'/m_j,

      k = sqrt(M_i(p) M_j(p')) / (m_i m_j) * [ pt . A[z] pt' / kT^2
          - (2 C |z|^gamma / kT) z . (pt - pt') + 2 C (gamma + 3) |z|^gamma ].
    """
    p = np.asarray(p, dtype=float)
    pprime = np.asarray(pprime, dtype=float)
    mi, mj = cfg.masses[i], cfg.masses[j]
    z = p / mi - pprime / mj
    z2 = float(np.dot(z, z))
    if z2 == 0.0:
        raise ZeroRelativeVelocity("k_kernel_entry at p/m_i = p'/m_j")
    u = np.asarray(cfg.drift)
    pt = p - mi * u
    ptp = pprime - mj * u
    kT = cfg.kT
    C = float(cfg.interaction[i, j])
    gam = cfg.gamma
    zg = z2 ** (0.5 * gam)
    phi = C * zg * z2
    Apt = phi * (ptp - z * (np.dot(z, ptp) / z2))
    bracket = (np.dot(pt, Apt) / kT ** 2
               - (2.0 * C * zg / kT) * np.dot(z, pt - ptp)
               + 2.0 * C * (gam + 3.0) * zg)
    Mi = maxwellian_values(mi, cfg.species[i].density, kT, u, p[None, :])[0]
    Mj = maxwellian_values(mj, cfg.species[j].density, kT, u, pprime[None, :])[0]
    return float(np.sqrt(Mi * Mj) * bracket / (mi * mj))


def k_kernel_matrix(cfg: MixtureConfig, grid: VelocityGrid,
                    chunk: int | None = None) -> OperatorMatrix:
    """Galerkin matrix w_a w_b k^{(ij)}(p_a, p_b) of the integral-kernel path of K.

    Coincident pairs (z = 0) contribute nothing.
    """
    N = cfg.n_species
    G = grid.n_nodes
    pts = grid.points
    w = grid.weights
    kT = cfg.kT
    u = np.asarray(cfg.drift)
    masses = cfg.masses
    sqrtM = np.sqrt(_species_maxwellians(cfg, grid))
    if chunk is None:
        chunk = max(16, int(1_500_000 // max(G, 1)) or 16)
    out = np.zeros((N * G, N * G))
    for i in range(N):
        for j in range(i, N):
            mi, mj = masses[i], masses[j]
            C = float(cfg.interaction[i, j])
            qa = pts / mi
            qb = pts / mj
            pt_a = pts - mi * u
            pt_b = pts - mj * u
            blk = out[i * G:(i + 1) * G, j * G:(j + 1) * G]
            for start in range(0, G, chunk):
                stop = min(start + chunk, G)
                rows = slice(start, stop)
                Phi, R, (zx, zy, zz) = radial_kernels(qa[rows], qb, C, cfg.gamma, with_z=True)
                z2 = zx * zx + zy * zy + zz * zz
                # pt . A[z] pt' = phi (pt . pt' - (z . pt)(z . pt') / |z|^2)
                dot_ab = (pt_a[rows, 0:1] * pt_b[None, :, 0]
                          + pt_a[rows, 1:2] * pt_b[None, :, 1]
                          + pt_a[rows, 2:3] * pt_b[None, :, 2])
                z_pa = zx * pt_a[rows, 0:1] + zy * pt_a[rows, 1:2] + zz * pt_a[rows, 2:3]
                z_pb = zx * pt_b[None, :, 0] + zy * pt_b[None, :, 1] + zz * pt_b[None, :, 2]
                with np.errstate(invalid="ignore", divide="ignore"):
                    pAp = Phi * (dot_ab - np.where(z2 > 0, z_pa * z_pb / z2, 0.0))
                bracket = (pAp / kT ** 2
                           - (2.0 / kT) * R * (z_pa - z_pb)
                           + 2.0 * (cfg.gamma + 3.0) * R)
                blk[rows] = ((w[rows] * sqrtM[i][rows])[:, None]
                             * bracket * (w * sqrtM[j])[None, :] / (mi * mj))
            if i != j:
                out[j * G:(j + 1) * G, i * G:(i + 1) * G] = blk.T
    return OperatorMatrix(matrix=out, tag="K_kernel", grid_spec=grid.spec,
                          meta={"mixture": cfg.as_dict()})
