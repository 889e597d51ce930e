"""Pass/fail verification of every structural property, for the `invariants` command.

Each check returns (passed, measured, tolerance_description).  Checks run at
the configured grid, sharing one lazily-assembled workspace; they are the fast
counterparts of the full acceptance suite in tests/.
"""
from __future__ import annotations

import numpy as np

from . import collision as co
from . import evolution as ev
from . import linearized as lin
from . import spectral as spec
from .fields import DistributionField
from .grid import VelocityGrid, build_grid, discrete_gradient, gram_matrices
from .mixture import (EquilibriumMoments, MixtureConfig, equilibrium_moments,
                      maxwellian_field, reference_maxwellian)


class Workspace:
    """Lazy shared assembly cache for invariant checks."""

    def __init__(self, cfg: MixtureConfig, grid: VelocityGrid, seed: int, samples: int):
        self.cfg = cfg
        self.grid = grid
        self.seed = seed
        self.samples = samples
        self._cache = {}

    def get(self, name: str):
        if name in self._cache:
            return self._cache[name]
        cfg, grid = self.cfg, self.grid
        if name == "grad":
            val = discrete_gradient(grid)
        elif name == "grams":
            val = gram_matrices(grid, cfg)
        elif name == "negL_full":
            val = lin.assemble_negL("full", cfg, grid).matrix
        elif name == "negL_mono":
            val = lin.assemble_negL("mono", cfg, grid).matrix
        elif name == "negL_bi":
            val = self.get("negL_full") - self.get("negL_mono")
        elif name == "kb_full":
            val = lin.kernel_basis("full", cfg, grid)
        elif name == "kb_mono":
            val = lin.kernel_basis("mono", cfg, grid)
        elif name == "K_Lambda":
            val = lin.assemble_K_Lambda(cfg, grid)
        elif name == "maxwellian":
            val = reference_maxwellian(cfg, grid)
        elif name == "random_fields":
            rng = np.random.default_rng(self.seed)
            M = self.get("maxwellian").values
            fields = []
            for _ in range(self.samples):
                bump = 1.0 + 0.45 * np.sin(grid.points @ rng.normal(size=3)
                                           + rng.uniform(0, 2 * np.pi))
                scale = rng.uniform(0.5, 1.5, size=(cfg.n_species, 1))
                fields.append(DistributionField(M * bump[None, :] * scale, "density"))
            val = fields
        elif name == "perturbations":
            val = spec.random_perturbations(cfg, grid, self.samples, self.seed + 1)
        else:
            raise KeyError(name)
        self._cache[name] = val
        return val


def _check_grid_staggering(ws):
    g = ws.grid
    min_p = float(np.sqrt(np.einsum("ak,ak->a", g.points, g.points)).min())
    expect = np.sqrt(3.0) * g.spacing / 2.0
    return np.isclose(min_p, expect) and min_p > 0, min_p, f"= sqrt(3) h/2 = {expect:.3g} > 0"


def _check_weights_sum(ws):
    g = ws.grid
    total = float(g.weights.sum())
    expect = (2.0 * g.radius) ** 3
    rel = abs(total - expect) / expect
    return rel < 1e-12, rel, "sum w = (2R)^3 to 1e-12"


def _check_gradient_exactness(ws):
    g, grad = ws.grid, ws.get("grad")
    pts = g.points
    errs = [float(np.abs(grad.apply(np.ones(len(pts)))).max())]
    for k in range(3):
        got = grad.apply(pts[:, k])
        want = np.zeros_like(got)
        want[:, k] = 1.0
        errs.append(float(np.abs(got - want).max()))
        for l in range(k, 3):
            got = grad.apply(pts[:, k] * pts[:, l])
            want = np.zeros_like(got)
            want[:, k] += pts[:, l]
            want[:, l] += pts[:, k]
            errs.append(float(np.abs(got - want).max()))
    return max(errs) < 1e-10, max(errs), "exact on all degree<=2 monomials (<=1e-10)"


def _check_gram_spd(ws):
    grams = ws.get("grams")
    h = grams.h_norm.toarray()
    sym = float(np.abs(h - h.T).max())
    ev_min = float(np.linalg.eigvalsh(h)[0])
    l2_min = float(grams.l2.diagonal().min())
    ok = sym < 1e-12 * np.abs(h).max() and ev_min > 0 and l2_min > 0
    return ok, ev_min, "h_norm symmetric, both Grams positive definite"


def _check_maxwellian_roundtrip(ws):
    cfg, grid = ws.cfg, ws.grid
    mom = EquilibriumMoments(tuple(cfg.densities), cfg.drift, cfg.kT)
    M = maxwellian_field(cfg, mom, grid)
    back = equilibrium_moments(M, cfg, grid)
    errs = [abs(a / b - 1.0) for a, b in zip(back.densities, mom.densities)]
    errs.append(abs(back.temperature / mom.temperature - 1.0))
    errs += [abs(a - b) for a, b in zip(back.bulk_velocity, mom.bulk_velocity)]
    err = max(errs)
    return err <= 1e-6, err, "moment round-trip <= 1e-6 (needs R >= ~5.2 sigma)"


def _check_maxwellian_positive(ws):
    M = ws.get("maxwellian")
    v = float(M.values.min())
    return v > 0.0, v, "strictly positive nodal Maxwellians"


def _check_q_mass(ws):
    worst = 0.0
    for F in ws.get("random_fields")[: min(5, ws.samples)]:
        res = co.conservation_residuals(F, ws.cfg, ws.grid)
        worst = max(worst, float(res["mass_rel"].max()))
    return worst <= 1e-10, worst, "mass of every Q_ij <= 1e-10 relative"


def _check_q_momentum_energy(ws):
    worst = 0.0
    for F in ws.get("random_fields")[: min(5, ws.samples)]:
        res = co.conservation_residuals(F, ws.cfg, ws.grid)
        worst = max(worst, res["momentum_rel"], res["energy_rel"])
    return worst <= 1e-6, worst, "total momentum/energy of sum Q_ij <= 1e-6 relative"


def _check_q_bilinear(ws):
    cfg, grid = ws.cfg, ws.grid
    F = ws.get("random_fields")[0].values
    G2 = ws.get("random_fields")[1 % ws.samples].values
    a, b = 0.6, -0.3
    lhs = co.q_pair(a * F[0] + b * G2[0], F[-1], 0, cfg.n_species - 1, cfg, grid)
    rhs = (a * co.q_pair(F[0], F[-1], 0, cfg.n_species - 1, cfg, grid)
           + b * co.q_pair(G2[0], F[-1], 0, cfg.n_species - 1, cfg, grid))
    err = float(np.abs(lhs - rhs).max() / max(np.abs(rhs).max(), 1e-300))
    return err < 1e-12, err, "q_pair bilinear to roundoff"


def _check_q_equilibrium(ws):
    cfg, grid = ws.cfg, ws.grid
    M = ws.get("maxwellian")
    worst = 0.0
    for i in range(cfg.n_species):
        for j in range(cfg.n_species):
            Q = co.q_pair(M.values[i], M.values[j], i, j, cfg, grid)
            worst = max(worst, float(np.abs(Q).max() / M.values[i].max()))
    return worst <= 1e-10, worst, "Q_ij(M, M) annihilates reference Maxwellians"


def _check_entropy_production(ws):
    cfg, grid = ws.cfg, ws.grid
    worst = np.inf
    for F in ws.get("random_fields"):
        _, D = co.entropy_and_production(F, cfg, grid)
        worst = min(worst, D)
    M = ws.get("maxwellian")
    _, D0, s0 = co.entropy_and_production(M, cfg, grid, with_scale=True)
    ok = worst >= -1e-12 and abs(D0) <= 1e-10 * s0
    return ok, (worst, D0 / s0), "D >= -1e-12 on random fields; D(M)/scale <= 1e-10"


def _check_negL_symmetry(ws):
    errs = []
    for name in ("negL_full", "negL_mono", "negL_bi"):
        A = ws.get(name)
        errs.append(float(np.abs(A - A.T).max() / max(np.abs(A).max(), 1e-300)))
    return max(errs) <= 1e-12, max(errs), "||negL - negL^T|| <= 1e-12 ||negL||"


def _check_kernel_exactness(ws):
    out = []
    for sel, kind in (("negL_full", "kb_full"), ("negL_mono", "kb_mono")):
        A = ws.get(sel)
        kb = ws.get(kind)
        scale = float(np.abs(A).max())
        r = float(np.abs(np.einsum("ik,ij,jk->k", kb.vectors, A, kb.vectors)).max())
        out.append(r / scale)
    return max(out) <= 1e-10, max(out), "kernel Rayleigh quotients <= 1e-10 * scale"


def _check_nullspace_dims(ws):
    grams = ws.get("grams")
    N = ws.cfg.n_species
    d_full = spec.nullspace_dim(ws.get("negL_full"), grams.l2)
    d_mono = spec.nullspace_dim(ws.get("negL_mono"), grams.l2)
    ok = d_full == N + 4 and d_mono == 5 * N
    return ok, (d_full, d_mono), f"dim N(L) = {N + 4}, dim N(L^m) = {5 * N}"


def _check_semidefinite(ws):
    worst = 0.0
    K, Lam = ws.get("K_Lambda")
    mats = {"full": ws.get("negL_full"), "mono": ws.get("negL_mono"),
            "bi": ws.get("negL_bi"), "Lambda": Lam.dense()}
    for name, A in mats.items():
        vals = np.linalg.eigvalsh(A)
        worst = min(worst, vals[0] / max(abs(vals[-1]), 1e-300)) if vals[-1] else worst
    return worst >= -1e-10, worst, "smallest eigenvalue >= -1e-10 * ||.||"


def _check_k_lambda_identity(ws):
    K, Lam = ws.get("K_Lambda")
    A = ws.get("negL_full")
    resid = float(np.abs(K.dense() - Lam.dense() + A).max() / max(np.abs(A).max(), 1e-300))
    return resid <= 1e-12, resid, "K - Lambda + negL = 0 entrywise"


def _check_linear_conservation(ws):
    cfg, grid = ws.cfg, ws.grid
    A = ws.get("negL_full")
    sqrtM = np.sqrt(lin._species_maxwellians(cfg, grid))
    w = grid.weights
    pts = grid.points
    p2 = np.einsum("ak,ak->a", pts, pts)
    worst = 0.0
    for f in ws.get("perturbations")[: min(6, ws.samples)]:
        Lf = -lin.apply_negL(A, grid, f).reshape(cfg.n_species, -1)
        scale = float(np.abs(Lf).max()) * float(w.sum())
        for i in range(cfg.n_species):
            worst = max(worst, abs(float((sqrtM[i] * Lf[i]) @ w)) / scale)
        mom = sum(np.einsum("a,ak->k", sqrtM[i] * Lf[i] * w, pts)
                  for i in range(cfg.n_species))
        en = sum(float((sqrtM[i] * Lf[i]) @ (w * p2)) / (2 * cfg.masses[i])
                 for i in range(cfg.n_species))
        worst = max(worst, float(np.abs(mom).max()) / scale, abs(en) / scale)
    return worst <= 1e-8, worst, "sqrt(M)-weighted mass/momentum/energy of L f <= 1e-8"


def _check_boundedness(ws):
    grams = ws.get("grams")
    A = ws.get("negL_full")
    wfull = spec.stacked_weights(ws.grid, ws.cfg.n_species)
    kb = ws.get("kb_full")
    lam, _, _ = spec.restricted_extremal_eig(A, grams.h_norm, kb.vectors, wfull,
                                             which="max", method="dense")
    return np.isfinite(lam) and lam > 0, lam, "finite C with |(f, Lg)| <= C ||f||_H ||g||_H"


def _check_gap_positive(ws):
    grams = ws.get("grams")
    rep = spec.spectral_gap(ws.get("negL_full"), grams, ws.get("kb_full"), ws.grid)
    ok = rep.gap_l2 > 0 and rep.gap_h > 0
    ok = ok and rep.gap_h <= rep.gap_l2 / rep.lower_equivalence + 1e-12
    return ok, (rep.gap_l2, rep.gap_h), "gap_l2, gap_h > 0 and gap_h <= gap_l2 / c"


def _check_gap_certificate(ws):
    grams = ws.get("grams")
    rep = spec.spectral_gap(ws.get("negL_full"), grams, ws.get("kb_full"), ws.grid)
    ok = spec.certify_gap(ws.get("negL_full"), grams.l2, ws.get("kb_full"), ws.grid,
                          rep.gap_l2, n_samples=1000, seed=ws.seed)
    return ok, rep.gap_l2, "random deflated Rayleigh quotients >= gap (1 - 1e-6)"


def _check_cross_form(ws):
    if ws.cfg.n_species < 2:
        return True, "skipped (N=1)", "cross form needs N >= 2"
    cf = spec.cross_form_report(ws.cfg, ws.grid, negL_bi=ws.get("negL_bi"), seed=ws.seed)
    eigs = [np.linalg.eigvalsh(cf.A_matrices[i, j])[0]
            for i in range(ws.cfg.n_species) for j in range(ws.cfg.n_species) if i != j]
    ok = cf.identity_residual <= 1e-6 and min(eigs) > 0 and cf.B_scalars.min() > 0
    return ok, cf.identity_residual, "identity residual <= 1e-6; A pd; B > 0"


def _check_composite(ws):
    if ws.cfg.n_species < 2:
        return True, "skipped (N=1)", "composite constants need N >= 2"
    comp = spec.composite_constants(ws.cfg, ws.grid, seed=ws.seed,
                                    n_samples=max(200, ws.samples * 10))
    return comp["passed_sampled"], (comp["gap_h"], comp["lambda_pred_sampled"]), \
        "gap_h >= (C2 C3 / 2) min(1, lam_m / (C1 + C2 C3)) (1 - 1e-3)"


def _check_lemma_ue(ws):
    if ws.cfg.n_species < 2:
        return True, "skipped (N=1)", "needs N >= 2"
    r = spec.lemma_ue_ratio(max(200, ws.samples * 10), ws.cfg, ws.grid, seed=ws.seed)
    ok = (r["min_ratio"] > 0) or (r["trivial"] == r["samples"])
    return ok, r["min_ratio"], "min ratio > 0 over nontrivial samples"


def _check_coercivity(ws):
    c1, c2, c3, c4 = spec.coercivity_constants(ws.cfg, ws.grid, n_samples=ws.samples,
                                               seed=ws.seed)
    return c1 <= c2 and np.isfinite(c2), (c1, c2), "c1 <= c2 finite (c1 ~ 0: Lambda kernel)"


def _check_imex_contractive(ws):
    cfg, grid = ws.cfg, ws.grid
    A = ws.get("negL_full")
    gap = spec.spectral_gap(A, ws.get("grams"), ws.get("kb_full"), grid).gap_l2
    stepper = ev.LinearModeStepper(cfg, grid, A, dt=0.1 / max(gap, 1e-6))
    wfull = spec.stacked_weights(grid, cfg.n_species)
    rng = np.random.default_rng(ws.seed)
    worst = 0.0
    for _ in range(5):
        f = rng.standard_normal(A.shape[0]) + 1j * rng.standard_normal(A.shape[0])
        mode = ev.ModeProblem(np.zeros(3, dtype=int), f.reshape(cfg.n_species, -1))
        out = stepper.step(mode).values.reshape(-1)
        n0 = np.sqrt(np.real(np.conj(f) @ (wfull * f)))
        n1 = np.sqrt(np.real(np.conj(out) @ (wfull * out)))
        worst = max(worst, n1 / n0)
    return worst <= 1.0 + 1e-12, worst, "||f_next|| <= ||f|| (1 + 1e-12) at k = 0"


CHECKS = [
    ("grid.staggering", _check_grid_staggering),
    ("grid.weights_sum", _check_weights_sum),
    ("grid.gradient_exactness", _check_gradient_exactness),
    ("grid.gram_spd", _check_gram_spd),
    ("mixture.roundtrip", _check_maxwellian_roundtrip),
    ("mixture.positivity", _check_maxwellian_positive),
    ("collision.mass", _check_q_mass),
    ("collision.momentum_energy", _check_q_momentum_energy),
    ("collision.bilinearity", _check_q_bilinear),
    ("collision.equilibrium", _check_q_equilibrium),
    ("collision.entropy_production", _check_entropy_production),
    ("linearized.symmetry", _check_negL_symmetry),
    ("linearized.kernel_exactness", _check_kernel_exactness),
    ("linearized.nullspace_dims", _check_nullspace_dims),
    ("linearized.semidefinite", _check_semidefinite),
    ("linearized.K_Lambda_identity", _check_k_lambda_identity),
    ("linearized.conservation", _check_linear_conservation),
    ("linearized.boundedness", _check_boundedness),
    ("spectral.gap_positive", _check_gap_positive),
    ("spectral.gap_certificate", _check_gap_certificate),
    ("spectral.cross_form", _check_cross_form),
    ("spectral.lemma_ue", _check_lemma_ue),
    ("spectral.composite", _check_composite),
    ("spectral.coercivity", _check_coercivity),
    ("evolution.imex_contractive", _check_imex_contractive),
]


def run_invariants(cfg: MixtureConfig, grid: VelocityGrid, seed: int = 1234,
                   samples: int = 10) -> list[dict]:
    ws = Workspace(cfg, grid, seed, samples)
    results = []
    for name, fn in CHECKS:
        try:
            passed, measured, tol = fn(ws)
        except Exception as exc:  # a crashed check is a failed check
            passed, measured, tol = False, f"{type(exc).__name__}: {exc}", "check raised"
        results.append({"name": name, "passed": bool(passed),
                        "measured": repr(measured), "tolerance": tol})
    return results
