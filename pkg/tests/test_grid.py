import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from landaumix import errors
from landaumix import grid as lg


def test_staggering_formula():
    g = lg.build_grid(lg.GridSpec(points_per_axis=4, radius=2.0))
    assert g.spacing == pytest.approx(1.0)
    assert np.allclose(g.axis, [-1.5, -0.5, 0.5, 1.5])


@given(st.integers(4, 14), st.floats(0.5, 20.0))
@settings(max_examples=40, deadline=None)
def test_no_node_at_origin(n, R):
    g = lg.build_grid(lg.GridSpec(points_per_axis=n, radius=R))
    rmin = np.sqrt(np.einsum("ak,ak->a", g.points, g.points)).min()
    assert rmin == pytest.approx(np.sqrt(3.0) * g.spacing / 2.0, rel=1e-12)
    assert rmin > 0


def test_weights_partition():
    g = lg.build_grid(lg.GridSpec(points_per_axis=6, radius=3.0))
    assert g.weights.sum() == pytest.approx((2 * 3.0) ** 3, rel=1e-13)


def test_invalid_spec():
    with pytest.raises(errors.ConfigError):
        lg.GridSpec(points_per_axis=3, radius=1.0)
    with pytest.raises(errors.ConfigError):
        lg.GridSpec(points_per_axis=8, radius=-1.0)


class TestGradient:
    def setup_method(self):
        self.grid = lg.build_grid(lg.GridSpec(points_per_axis=6, radius=2.5))
        self.grad = lg.discrete_gradient(self.grid)

    def test_constant(self):
        out = self.grad.apply(np.ones(self.grid.n_nodes))
        assert np.abs(out).max() == 0.0

    def test_all_monomials_exact(self):
        pts = self.grid.points
        worst = 0.0
        for k in range(3):
            got = self.grad.apply(pts[:, k])
            want = np.zeros_like(got)
            want[:, k] = 1.0
            worst = max(worst, np.abs(got - want).max())
            for l in range(3):
                got = self.grad.apply(pts[:, k] * pts[:, l])
                want = np.zeros_like(got)
                want[:, k] += pts[:, l]
                want[:, l] += pts[:, k]
                worst = max(worst, np.abs(got - want).max())
        assert worst < 1e-12

    @given(st.lists(st.floats(-3, 3), min_size=10, max_size=10))
    @settings(max_examples=30, deadline=None)
    def test_random_quadratic_exact(self, coeffs):
        pts = self.grid.points
        c = np.asarray(coeffs)
        f = (c[0] + pts @ c[1:4]
             + c[4] * pts[:, 0] * pts[:, 1] + c[5] * pts[:, 0] * pts[:, 2]
             + c[6] * pts[:, 1] * pts[:, 2]
             + c[7] * pts[:, 0] ** 2 + c[8] * pts[:, 1] ** 2 + c[9] * pts[:, 2] ** 2)
        grad_true = np.stack([
            c[1] + c[4] * pts[:, 1] + c[5] * pts[:, 2] + 2 * c[7] * pts[:, 0],
            c[2] + c[4] * pts[:, 0] + c[6] * pts[:, 2] + 2 * c[8] * pts[:, 1],
            c[3] + c[5] * pts[:, 0] + c[6] * pts[:, 1] + 2 * c[9] * pts[:, 2]], axis=-1)
        got = self.grad.apply(f)
        assert np.abs(got - grad_true).max() <= 1e-10 * max(1.0, np.abs(grad_true).max())

    def test_divergence_is_adjoint(self):
        rng = np.random.default_rng(0)
        g = self.grid
        psi = rng.standard_normal(g.n_nodes)
        flux = rng.standard_normal((g.n_nodes, 3))
        lhs = np.dot(g.weights * psi, self.grad.divergence(flux))
        rhs = -np.einsum("a,ak,ak->", g.weights, self.grad.apply(psi), flux)
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestIntegrate:
    def test_constant(self):
        g = lg.build_grid(lg.GridSpec(points_per_axis=8, radius=2.0))
        assert lg.integrate(g, np.ones(g.n_nodes)) == pytest.approx(4.0 ** 3)

    def test_unit_gaussian(self):
        # closed-form oracle: a normalized Gaussian integrates to exactly 1
        g = lg.build_grid(lg.GridSpec(points_per_axis=16, radius=6.0))
        p2 = np.einsum("ak,ak->a", g.points, g.points)
        v = np.exp(-0.5 * p2) / (2 * np.pi) ** 1.5
        assert abs(lg.integrate(g, v) - 1.0) < 1e-8

    def test_odd_integrand(self):
        g = lg.build_grid(lg.GridSpec(points_per_axis=8, radius=3.0))
        v = g.points[:, 0] * np.exp(-np.einsum("ak,ak->a", g.points, g.points))
        assert abs(lg.integrate(g, v)) < 1e-14

    def test_nonfinite_rejected(self):
        g = lg.build_grid(lg.GridSpec(points_per_axis=4, radius=1.0))
        v = np.ones(g.n_nodes)
        v[0] = np.inf
        with pytest.raises(ValueError):
            lg.integrate(g, v)


class TestGram:
    def setup_method(self):
        from landaumix import mixture as lm
        self.cfg = lm.mixture([1.0, 2.0], gamma=0.0, kT=0.5)
        self.grid = lg.build_grid(lg.GridSpec(points_per_axis=8, radius=6.0))
        self.grams = lg.gram_matrices(self.grid, self.cfg)

    def test_symmetric_positive(self):
        h = self.grams.h_norm.toarray()
        assert np.abs(h - h.T).max() <= 1e-12 * np.abs(h).max()
        assert np.linalg.eigvalsh(h)[0] > 0
        assert self.grams.l2.diagonal().min() > 0

    def test_zero_field(self):
        f = np.zeros(2 * self.grid.n_nodes)
        assert f @ (self.grams.h_norm @ f) == 0.0

    def test_gamma0_constant_field(self):
        # zero gradient leaves only the zeroth-order <p>^2 term
        f = np.concatenate([np.ones(self.grid.n_nodes), np.zeros(self.grid.n_nodes)])
        got = f @ (self.grams.h_norm @ f)
        want = np.sum(self.grid.weights * self.grid.bracket() ** 2)
        assert got == pytest.approx(want, rel=1e-12)

    def test_h_dominates_l2(self):
        rng = np.random.default_rng(1)
        c = self.grams.lower_equivalence
        assert c >= 1.0
        for _ in range(10):
            f = rng.standard_normal(2 * self.grid.n_nodes)
            assert f @ (self.grams.h_norm @ f) >= c * (f @ (self.grams.l2 @ f)) * (1 - 1e-12)
