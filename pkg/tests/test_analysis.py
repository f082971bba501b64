import math

import numpy as np
import pytest

from sitfem.analysis import diagonal_profile, energy_norm, fit_eoc, integrate, l2_norm
from sitfem.mesh import assemble_mass, assemble_stiffness, build_mesh
from sitfem.model import ModelParams
from sitfem.stepper import State

P = ModelParams()


@pytest.fixture(scope="module")
def ops():
    m = build_mesh(16)
    return m, assemble_mass(m), assemble_stiffness(m)


def test_l2_of_linear(ops):
    mesh, mass, _ = ops
    assert l2_norm(mesh.nodes[:, 0], mass) == pytest.approx(1 / math.sqrt(3), rel=1e-12)
    assert l2_norm(np.ones(mesh.num_nodes), mass) == pytest.approx(1.0, rel=1e-12)


def test_integrate(ops):
    mesh, mass, _ = ops
    x, y = mesh.nodes.T
    assert integrate(np.ones_like(x), mass) == pytest.approx(1.0, rel=1e-13)
    assert integrate(x + 2 * y, mass) == pytest.approx(1.5, rel=1e-13)


def test_energy_norm(ops):
    mesh, mass, K = ops
    x = mesh.nodes[:, 0]
    z = np.zeros_like(x)
    assert energy_norm(State(x, z, z, 0.0), mass, K, P) == pytest.approx(math.sqrt(P.mu_M / 3 + P.alpha_M), rel=1e-12)
    one = np.ones_like(x)
    want = math.sqrt(P.mu_M + P.mu_F + P.mu_S)
    assert energy_norm(State(one, one, one, 0.0), mass, K, P) == pytest.approx(want, rel=1e-12)


def test_diagonal_profile(ops):
    mesh, _, _ = ops
    x, y = mesh.nodes.T
    prof = diagonal_profile(x * y, mesh)
    assert len(prof.x) == 17
    np.testing.assert_allclose(prof.x, np.linspace(0, 1, 17))
    np.testing.assert_allclose(prof.values, prof.x**2)


@pytest.mark.parametrize("q", [0.5, 1.0, 1.5, 2.0, 3.0])
def test_eoc_recovers_rate(q):
    hs = [1 / 10, 1 / 20, 1 / 40, 1 / 80, 1 / 160]
    fit = fit_eoc([(h, 7.0 + 3.0 * h**q) for h in hs])
    assert fit.q == pytest.approx(q, abs=1e-6)
    assert fit.f0 == pytest.approx(7.0, abs=1e-8)
    assert fit.c == pytest.approx(3.0, rel=1e-5)
    assert not fit.degenerate


def test_eoc_reference_column():
    dts = [1 / 10, 1 / 20, 1 / 40, 1 / 80]
    vals = [4784.36, 4786.06, 4786.94, 4787.38]
    fit = fit_eoc(list(zip(dts, vals)))
    assert fit.q == pytest.approx(0.97, abs=0.02)


def test_eoc_degenerate():
    fit = fit_eoc([(0.1, 2.0), (0.05, 2.0), (0.025, 2.0)])
    assert fit.degenerate and math.isnan(fit.q) and fit.c == 0 and fit.f0 == 2.0


def test_eoc_input_validation():
    with pytest.raises(ValueError):
        fit_eoc([(0.1, 1.0), (0.05, 2.0)])
    with pytest.raises(ValueError):
        fit_eoc([(0.1, 1.0), (0.1, 2.0), (0.05, 3.0)])
    with pytest.raises(ValueError):
        fit_eoc([(0.1, 1.0), (-0.1, 2.0), (0.05, 3.0)])
