import numpy as np
import pytest

from landaumix import grid as lg
from landaumix import linearized as lin
from landaumix import mixture as lm
from landaumix import spectral as spec


class TestNullspaceDim:
    def test_full_and_mono(self, negL8, grams8):
        assert spec.nullspace_dim(negL8["full"], grams8.l2) == 6
        assert spec.nullspace_dim(negL8["mono"], grams8.l2) == 10

    def test_gram_is_definite(self, grams8):
        n = grams8.l2.shape[0]
        assert spec.nullspace_dim(grams8.l2.toarray(), np.eye(n)) == 0


class TestSpectralGap:
    def test_report(self, negL8, grams8, kernels8, grid8):
        rep = spec.spectral_gap(negL8["full"], grams8, kernels8["full"], grid8,
                                method="dense")
        assert rep.gap_l2 > 0 and rep.gap_h > 0
        assert rep.nullspace_dim == 6
        assert rep.gap_h <= rep.gap_l2 / rep.lower_equivalence + 1e-12
        assert max(rep.residuals.values()) < 1e-8

    def test_dense_vs_lobpcg(self, negL8, grams8, kernels8, grid8):
        wfull = spec.stacked_weights(grid8, 2)
        for gram in (grams8.l2, grams8.h_norm):
            d, _, _ = spec.restricted_extremal_eig(negL8["full"], gram,
                                                   kernels8["full"].vectors, wfull,
                                                   which="min", method="dense")
            it, _, _ = spec.restricted_extremal_eig(negL8["full"], gram,
                                                    kernels8["full"].vectors, wfull,
                                                    which="min", method="lobpcg", seed=3)
            assert abs(d - it) <= 1e-8 * abs(d)

    def test_single_species_mono_equals_full(self):
        cfg = lm.mixture([1.0], gamma=0.0, kT=0.5)
        grid = lg.build_grid(lg.GridSpec(points_per_axis=6, radius=6.0))
        grams = lg.gram_matrices(grid, cfg)
        A_full = lin.assemble_negL("full", cfg, grid).matrix
        A_mono = lin.assemble_negL("mono", cfg, grid).matrix
        kbf = lin.kernel_basis("full", cfg, grid)
        kbm = lin.kernel_basis("mono", cfg, grid)
        gf = spec.spectral_gap(A_full, grams, kbf, grid).gap_h
        gm = spec.spectral_gap(A_mono, grams, kbm, grid).gap_h
        assert gf == pytest.approx(gm, rel=1e-10)

    def test_certificate(self, negL8, grams8, kernels8, grid8):
        rep = spec.spectral_gap(negL8["full"], grams8, kernels8["full"], grid8)
        assert spec.certify_gap(negL8["full"], grams8.l2, kernels8["full"], grid8,
                                rep.gap_l2, n_samples=300, seed=0)


class TestCrossForm:
    def test_identity_and_positivity(self, cfg_ref, grid8, negL8):
        cf = spec.cross_form_report(cfg_ref, grid8, negL_bi=negL8["bi"], seed=2)
        assert cf.identity_residual <= 1e-6
        for i in range(2):
            for j in range(2):
                assert np.linalg.eigvalsh(cf.A_matrices[i, j])[0] > 0
                assert cf.B_scalars[i, j] > 0
        assert cf.C2 > 0

    def test_isotropy_equal_masses(self):
        cfg = lm.mixture([1.0, 1.0], [1.0, 1.0], gamma=0.0, kT=0.5)
        grid = lg.build_grid(lg.GridSpec(points_per_axis=8, radius=6.0))
        A_fam, _ = spec.cross_species_forms(cfg, grid)
        A01 = A_fam[0, 1]
        a = np.trace(A01) / 3.0
        assert np.abs(A01 - a * np.eye(3)).max() <= 1e-8 * a
        assert a > 0

    def test_common_moment_kernel_field_in_null(self, cfg_ref, grid8, negL8):
        # equal (u_i, e_i) across species puts f_par in N(L); the bi form vanishes
        u = np.array([[0.3, -0.1, 0.2]] * 2)
        e = np.array([0.4, 0.4])
        alpha = np.array([0.7, -0.2])
        f = spec.mono_kernel_field(cfg_ref, grid8, alpha, u, e)
        val = f @ (negL8["bi"] @ f)
        assert abs(val) <= 1e-10 * np.abs(negL8["bi"]).max() * (f @ f)


class TestLemmaUE:
    def test_kernel_field_is_trivial_case(self, cfg_ref, grid8, kernels8, grams8):
        u = np.array([[0.1, 0.0, -0.2]] * 2)
        e = np.array([0.3, 0.3])
        f = spec.mono_kernel_field(cfg_ref, grid8, np.array([0.5, -0.1]), u, e)
        _, uu, ee = lin.mono_coefficients(cfg_ref, grid8, f)
        lhs = sum(np.sum((uu[i] - uu[j]) ** 2) + (ee[i] - ee[j]) ** 2
                  for i in range(2) for j in range(2))
        assert lhs <= 1e-18
        dL = f - lin.project(kernels8["full"], f, grid8)[0]
        dm = f - lin.project(kernels8["mono"], f, grid8)[0]
        H = grams8.h_norm
        rhs = dL @ (H @ dL) - 2 * (dm @ (H @ dm))
        assert rhs <= 1e-12 * (f @ (H @ f))

    def test_distinct_velocities_give_positive_lhs(self, cfg_ref, grid8):
        u = np.array([[0.5, 0.0, 0.0], [-0.5, 0.0, 0.0]])
        e = np.array([0.0, 0.0])
        f = spec.mono_kernel_field(cfg_ref, grid8, np.zeros(2), u, e)
        _, uu, _ = lin.mono_coefficients(cfg_ref, grid8, f)
        assert np.sum((uu[0] - uu[1]) ** 2) > 0.9

    def test_min_ratio_positive(self, cfg_ref, grid8):
        r = spec.lemma_ue_ratio(200, cfg_ref, grid8, seed=0)
        assert r["min_ratio"] > 0

    def test_exact_pencil_bounds_sampled(self, cfg_ref, grid8):
        r = spec.lemma_ue_ratio(100, cfg_ref, grid8, seed=1)
        c3 = spec.c3_exact(cfg_ref, grid8)
        assert c3 > 0
        assert c3 <= r["min_ratio"] * (1 + 1e-8)


class TestCoercivity:
    def test_constants(self, cfg_ref, grid8):
        c1, c2, c3, c4 = spec.coercivity_constants(cfg_ref, grid8, n_samples=12, seed=0)
        # the split's Lambda annihilates sqrt(M_i), so c1 collapses to ~0
        assert abs(c1) <= 1e-8 * abs(c2)
        assert c1 <= c2 and np.isfinite(c2) and c2 > 0

    def test_gradient_bound_fit_valid(self, cfg_ref, grid8):
        from landaumix.collision import gradient_for
        from landaumix.grid import h_gram_single
        from landaumix.linearized import lambda_sparse
        lam = lambda_sparse(cfg_ref, grid8)
        c1, c2, c3, c4 = spec.coercivity_constants(cfg_ref, grid8, lam_matrix=lam,
                                                   n_samples=12, seed=0)
        grad = gradient_for(grid8)
        h_single = h_gram_single(grid8, grad, cfg_ref.gamma)
        wfull = spec.stacked_weights(grid8, 2)
        fields = spec.random_perturbations(cfg_ref, grid8, 12, 0)
        G = grid8.n_nodes
        for f in fields:
            Lf = (lam @ f) / wfull
            y = x1 = 0.0
            for i in range(2):
                gf = grad.apply(f[i * G:(i + 1) * G])
                gL = grad.apply(Lf[i * G:(i + 1) * G])
                y += float(np.einsum("ak,a,ak->", gf, grid8.weights, gL))
                for k in range(3):
                    x1 += float(gf[:, k] @ (h_single @ gf[:, k]))
            x2 = float(f @ (wfull * f))
            assert y >= c3 * x1 - c4 * x2 - 1e-9 * (abs(y) + c4 * x2)


class TestKCompactness:
    def test_monotone_decay_and_slope(self):
        cfg = lm.mixture([1.0], gamma=-2.0, kT=3.0)
        grid = lg.build_grid(lg.GridSpec(points_per_axis=10, radius=0.3))
        res = spec.k_compactness_decay(cfg, grid, [2, 4, 8, 16])
        norms = [row[1] for row in res["table"]]
        assert all(a >= b for a, b in zip(norms, norms[1:]))
        assert all(v > 0 for v in norms)
        assert res["slope"] <= -0.7

    def test_cutoff_below_lattice_gives_exact_equality(self):
        cfg = lm.mixture([1.0], gamma=-2.0, kT=3.0)
        grid = lg.build_grid(lg.GridSpec(points_per_axis=10, radius=0.3))
        res = spec.k_compactness_decay(cfg, grid, [256])
        assert res["table"][0][1] == 0.0
        assert res["table"][0][2] == 0


class TestComposite:
    def test_composite_bound(self, cfg_ref, grid8):
        comp = spec.composite_constants(cfg_ref, grid8, seed=0, n_samples=300)
        assert comp["identity_residual"] <= 1e-6
        assert comp["C2"] > 0 and comp["C3_sampled"] > 0 and comp["C3_exact"] > 0
        assert comp["lambda_m"] > 0 and comp["gap_h"] > 0
        assert comp["passed_sampled"]
        assert comp["passed_exact"]
        # sampled min ratio can only overestimate the exact infimum
        assert comp["C3_exact"] <= comp["C3_sampled"] * (1 + 1e-8)
        assert comp["C1_sampled"] <= comp["C1_exact"] * (1 + 1e-8)
