"""Chunked O(G^2) pairwise aggregation against the anisotropic collision kernel.

Every velocity-space pair sum in the toolkit reduces to contractions of
A_kl[z_ab] = C * (phi(|z|) delta_kl - |z|^gamma z_k z_l),  z_ab = p_a/m_i - p_b/m_j,
with per-node weight data.  Because z is affine in (p_a, p_b), each contraction
collapses to matrix products of two base kernels

    R(a, b)   = C |z_ab|^gamma,
    Phi(a, b) = R(a, b) |z_ab|^2,

against moment-augmented stacks of the weight data, so the inner loops run as
BLAS GEMMs.  Pairs with z = 0 contribute nothing (phi -> 0 for gamma > -2; the
projection is directionless at z = 0).
"""
from __future__ import annotations

import numpy as np

_SYM6 = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def radial_kernels(qa: np.ndarray, qb: np.ndarray, cij: float, gamma: float,
                   with_z: bool = False):
    """Base kernels R = C|z|^gamma and Phi = R|z|^2 for z = qa[:,None] - qb[None,:].

    Coincident pairs (z = 0) are zeroed in both.  Returns (Phi, R) of shape
    (len(qa), len(qb)), plus the z components (dx, dy, dz) when requested.
    """
    dx = qa[:, 0:1] - qb[None, :, 0]
    dy = qa[:, 1:2] - qb[None, :, 1]
    dz = qa[:, 2:3] - qb[None, :, 2]
    z2 = dx * dx + dy * dy + dz * dz
    mask = z2 > 0.0
    half = 0.5 * gamma
    if half == 0.0:
        R = np.where(mask, cij, 0.0)
    elif half == 0.5:
        R = cij * np.sqrt(z2)
    elif half == -0.5:
        with np.errstate(divide="ignore"):
            R = np.where(mask, cij / np.sqrt(z2), 0.0)
    elif half == -1.0:
        with np.errstate(divide="ignore"):
            R = np.where(mask, cij / z2, 0.0)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            R = np.where(mask, cij * z2 ** half, 0.0)
    Phi = R * z2
    if with_z:
        return Phi, R, (dx, dy, dz)
    return Phi, R


def _moment_stack_scalar(s: np.ndarray, qb: np.ndarray) -> np.ndarray:
    """Columns [s, s*qb_k (3), s*qb_k*qb_l (6 sym)] for one scalar weight row."""
    cols = [s]
    cols += [s * qb[:, k] for k in range(3)]
    cols += [s * qb[:, k] * qb[:, l] for (k, l) in _SYM6]
    return np.column_stack(cols)


def _moment_stack_vector(v: np.ndarray, qb: np.ndarray) -> np.ndarray:
    """Columns [v_l (3), qb.v, qb_k v_l (9), qb_k (qb.v) (3)] for one vector weight."""
    qbv = np.einsum("bk,bk->b", qb, v)
    cols = [v[:, l] for l in range(3)]
    cols.append(qbv)
    cols += [qb[:, k] * v[:, l] for k in range(3) for l in range(3)]
    cols += [qb[:, k] * qbv for k in range(3)]
    return np.column_stack(cols)


def _moment_stack_quad(Wq: np.ndarray, qb: np.ndarray) -> np.ndarray:
    """Columns [W_kl (6 sym), (W qb)_k (3), qb.W.qb] for one symmetric matrix weight."""
    cols = [Wq[:, k, l] for (k, l) in _SYM6]
    Wqb = np.einsum("bkl,bl->bk", Wq, qb)
    cols += [Wqb[:, k] for k in range(3)]
    cols.append(np.einsum("bk,bk->b", qb, Wqb))
    return np.column_stack(cols)


def pair_aggregate(points_a, points_b, m_a, m_b, cij, gamma,
                   scalars=None, vectors=None, quads=None, chunk=None):
    """Aggregate sum_b A_kl[z_ab] * (weight data at b) for every row node a.

    Parameters
    ----------
    points_a, points_b : (Ga, 3), (Gb, 3) momentum nodes.
    m_a, m_b : species masses entering z = p_a/m_a - p_b/m_b.
    cij, gamma : kernel strength and potential exponent.
    scalars : (S, Gb) scalar weights s(b); yields mats[s][a] = sum_b A[z_ab] s(b).
    vectors : (V, Gb, 3) vector weights v(b); yields vecs[v][a] = sum_b A[z_ab] v(b).
    quads : (Q, Gb, 3, 3) symmetric weights W(b); yields
        quadvals[q][a] = sum_b A_kl[z_ab] W_kl(b).

    All weight arrays must already include quadrature weights.  Returns
    (mats (S, Ga, 3, 3), vecs (V, Ga, 3), quadvals (Q, Ga)); entries are None
    for weight groups not supplied.
    """
    points_a = np.asarray(points_a, dtype=float)
    points_b = np.asarray(points_b, dtype=float)
    qa_full = points_a / m_a
    qb = points_b / m_b
    Ga, Gb = len(points_a), len(points_b)

    scalars = None if scalars is None else np.atleast_2d(np.asarray(scalars, dtype=float))
    if vectors is not None:
        vectors = np.asarray(vectors, dtype=float)
        if vectors.ndim == 2:
            vectors = vectors[None]
    if quads is not None:
        quads = np.asarray(quads, dtype=float)
        if quads.ndim == 3:
            quads = quads[None]

    r_cols, p_cols = [], []
    if scalars is not None:
        for s in scalars:
            r_cols.append(_moment_stack_scalar(s, qb))
            p_cols.append(s[:, None])
    if vectors is not None:
        for v in vectors:
            r_cols.append(_moment_stack_vector(v, qb))
            p_cols.append(v)
    if quads is not None:
        for Wq in quads:
            r_cols.append(_moment_stack_quad(Wq, qb))
            p_cols.append(np.einsum("bkk->b", Wq)[:, None])
    if not r_cols:
        raise ValueError("no weight data supplied")
    Rstack = np.ascontiguousarray(np.hstack(r_cols))
    Pstack = np.ascontiguousarray(np.hstack(p_cols))

    if chunk is None:
        chunk = max(16, min(Ga, int(2_000_000 // max(Gb, 1)) or 16))

    Rm = np.empty((Ga, Rstack.shape[1]))
    Pm = np.empty((Ga, Pstack.shape[1]))
    for start in range(0, Ga, chunk):
        stop = min(start + chunk, Ga)
        Phi, R = radial_kernels(qa_full[start:stop], qb, cij, gamma)
        Rm[start:stop] = R @ Rstack
        Pm[start:stop] = Phi @ Pstack
        del Phi, R

    mats = vecs = quadvals = None
    qa = qa_full
    rc = pc = 0
    if scalars is not None:
        S = scalars.shape[0]
        mats = np.empty((S, Ga, 3, 3))
        for s_idx in range(S):
            c = Rm[:, rc:rc + 10]
            c0, ck, ckl6 = c[:, 0], c[:, 1:4], c[:, 4:10]
            phi_s = Pm[:, pc]
            ckl = np.empty((Ga, 3, 3))
            for m6, (k, l) in enumerate(_SYM6):
                ckl[:, k, l] = ckl6[:, m6]
                ckl[:, l, k] = ckl6[:, m6]
            zz = (np.einsum("ak,al->akl", qa, qa) * c0[:, None, None]
                  - np.einsum("ak,al->akl", qa, ck)
                  - np.einsum("al,ak->akl", qa, ck)
                  + ckl)
            mats[s_idx] = -zz
            for k in range(3):
                mats[s_idx, :, k, k] += phi_s
            rc += 10
            pc += 1
    if vectors is not None:
        V = vectors.shape[0]
        vecs = np.empty((V, Ga, 3))
        for v_idx in range(V):
            c = Rm[:, rc:rc + 16]
            c_v, c_qv = c[:, 0:3], c[:, 3]
            c_kl = c[:, 4:13].reshape(Ga, 3, 3)
            c_kqv = c[:, 13:16]
            phi_v = Pm[:, pc:pc + 3]
            qa_cv = np.einsum("ak,ak->a", qa, c_v)
            zzv = (qa * (qa_cv - c_qv)[:, None]
                   - np.einsum("al,akl->ak", qa, c_kl)
                   + c_kqv)
            vecs[v_idx] = phi_v - zzv
            rc += 16
            pc += 3
    if quads is not None:
        Q = quads.shape[0]
        quadvals = np.empty((Q, Ga))
        for q_idx in range(Q):
            c = Rm[:, rc:rc + 10]
            c_W6, c_Wqb, c_qWq = c[:, 0:6], c[:, 6:9], c[:, 9]
            phi_tr = Pm[:, pc]
            qWq = np.zeros(Ga)
            for m6, (k, l) in enumerate(_SYM6):
                fac = 1.0 if k == l else 2.0
                qWq += fac * qa[:, k] * qa[:, l] * c_W6[:, m6]
            cross = np.einsum("ak,ak->a", qa, c_Wqb)
            quadvals[q_idx] = phi_tr - (qWq - 2.0 * cross + c_qWq)
            rc += 10
            pc += 1
    return mats, vecs, quadvals


def pair_aggregate_brute(points_a, points_b, m_a, m_b, cij, gamma,
                         scalars=None, vectors=None, quads=None):
    """Direct per-pair reference implementation (tests only)."""
    from .collision import a_kernel

    points_a = np.asarray(points_a, dtype=float)
    points_b = np.asarray(points_b, dtype=float)
    Ga, Gb = len(points_a), len(points_b)
    scalars = None if scalars is None else np.atleast_2d(scalars)
    if vectors is not None:
        vectors = np.asarray(vectors, dtype=float)
        if vectors.ndim == 2:
            vectors = vectors[None]
    if quads is not None:
        quads = np.asarray(quads, dtype=float)
        if quads.ndim == 3:
            quads = quads[None]
    mats = None if scalars is None else np.zeros((scalars.shape[0], Ga, 3, 3))
    vecs = None if vectors is None else np.zeros((vectors.shape[0], Ga, 3))
    quadvals = None if quads is None else np.zeros((quads.shape[0], Ga))
    for a in range(Ga):
        for b in range(Gb):
            z = points_a[a] / m_a - points_b[b] / m_b
            if np.dot(z, z) == 0.0:
                continue
            A = a_kernel(z, cij, gamma)
            if mats is not None:
                for s in range(scalars.shape[0]):
                    mats[s, a] += A * scalars[s, b]
            if vecs is not None:
                for v in range(vectors.shape[0]):
                    vecs[v, a] += A @ vectors[v, b]
            if quadvals is not None:
                for q in range(quads.shape[0]):
                    quadvals[q, a] += np.sum(A * quads[q, b])
    return mats, vecs, quadvals
