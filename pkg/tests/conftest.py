import numpy as np
import pytest

from landaumix import grid as lg
from landaumix import linearized as lin
from landaumix import mixture as lm


@pytest.fixture(scope="session")
def cfg_ref():
    """Two-species reference mixture: masses (1, 2), gamma 0, kT 0.5."""
    return lm.mixture([1.0, 2.0], [1.0, 1.0], gamma=0.0, kT=0.5)


@pytest.fixture(scope="session")
def grid8():
    return lg.build_grid(lg.GridSpec(points_per_axis=8, radius=6.0))


@pytest.fixture(scope="session")
def grid6():
    return lg.build_grid(lg.GridSpec(points_per_axis=6, radius=6.0))


@pytest.fixture(scope="session")
def grams8(cfg_ref, grid8):
    return lg.gram_matrices(grid8, cfg_ref)


@pytest.fixture(scope="session")
def negL8(cfg_ref, grid8):
    return {sel: lin.assemble_negL(sel, cfg_ref, grid8).matrix
            for sel in ("full", "mono", "bi")}


@pytest.fixture(scope="session")
def kernels8(cfg_ref, grid8):
    return {kind: lin.kernel_basis(kind, cfg_ref, grid8) for kind in ("full", "mono")}


def enveloped_fields(cfg, grid, n, seed, positive=True):
    """Random Maxwellian-enveloped density fields (strictly positive)."""
    rng = np.random.default_rng(seed)
    M = lm.reference_maxwellian(cfg, grid).values
    out = []
    for _ in range(n):
        bump = 1.0 + 0.45 * np.sin(grid.points @ rng.normal(size=3)
                                   + rng.uniform(0, 2 * np.pi))
        scale = rng.uniform(0.5, 1.5, size=(cfg.n_species, 1))
        vals = M * bump[None, :] * scale
        out.append(vals)
    return out
