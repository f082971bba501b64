import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sitfem.mesh import assemble_mass, assemble_stiffness, build_mesh


def test_smallest_mesh():
    m = build_mesh(1)
    assert m.num_nodes == 4 and len(m.triangles) == 2 and m.h == 1.0
    np.testing.assert_array_equal(m.nodes, [[0, 0], [1, 0], [0, 1], [1, 1]])


def test_counts_n64():
    m = build_mesh(64)
    assert m.num_nodes == 65**2 == 4225
    assert len(m.triangles) == 2 * 64**2 == 8192
    assert m.h == pytest.approx(1 / 64)


def test_center_node_present():
    m = build_mesh(2)
    assert np.any(np.all(m.nodes == [0.5, 0.5], axis=1))


@pytest.mark.parametrize("n", [0, -3, 2.5])
def test_rejects_bad_n(n):
    with pytest.raises(ValueError):
        build_mesh(n)


@pytest.mark.parametrize("n", [1, 3, 8, 17])
def test_triangle_invariants(n):
    m = build_mesh(n)
    a = m.signed_areas()
    np.testing.assert_allclose(a, 0.5 / n**2, rtol=1e-13)
    assert a.sum() == pytest.approx(1.0, abs=1e-13)
    # every cell split along lower-left -> upper-right diagonal
    for tri in m.triangles[:4]:
        pts = m.nodes[tri]
        assert any(np.allclose(pts[i] - pts[j], [m.h, m.h]) for i in range(3) for j in range(3))
    for k in range(n + 1):
        assert np.allclose(m.nodes[m.diagonal_nodes()[k]], [k / n, k / n])


def test_mass_n1_hand_assembly():
    M = assemble_mass(build_mesh(1)).toarray()
    # two triangles of area 1/2: (1/24)[[2,1,1],...]; nodes 0 and 3 are shared
    expected = np.array(
        [
            [4, 1, 1, 2],
            [1, 2, 0, 1],
            [1, 0, 2, 1],
            [2, 1, 1, 4],
        ]
    ) / 24.0
    np.testing.assert_allclose(M, expected, atol=1e-16)
    assert M[0, 0] == pytest.approx(1 / 6)


def test_stiffness_n1_hand_assembly():
    K = assemble_stiffness(build_mesh(1)).toarray()
    expected = np.array(
        [[1, -0.5, -0.5, 0], [-0.5, 1, 0, -0.5], [-0.5, 0, 1, -0.5], [0, -0.5, -0.5, 1]]
    )
    np.testing.assert_allclose(K, expected, atol=1e-15)


@pytest.mark.parametrize("n", [1, 2, 5, 16])
def test_matrix_invariants(n):
    m = build_mesh(n)
    M = assemble_mass(m)
    K = assemble_stiffness(m)
    for A in (M, K):
        assert A.shape == (m.num_nodes, m.num_nodes)
        assert abs(A - A.T).max() <= 1e-14 * abs(A).max()
        # structural symmetry
        assert (A != 0).nnz == (A.T != 0).nnz and ((A != 0) != (A.T != 0)).nnz == 0
    assert M.data.min() >= 0
    assert M.sum() == pytest.approx(1.0, abs=1e-13)
    ones = np.ones(m.num_nodes)
    lumped = M @ ones
    assert lumped.min() > 0 and lumped.sum() == pytest.approx(1.0, abs=1e-13)
    assert np.abs(K @ ones).max() <= 1e-14 * max(1, n) ** 0


@given(n=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_stiffness_semidefinite(n, seed):
    m = build_mesh(n)
    K = assemble_stiffness(m)
    v = np.random.default_rng(seed).normal(size=m.num_nodes)
    assert v @ (K @ v) >= -1e-12


@pytest.mark.parametrize("n", [1, 4, 13, 32])
def test_patch_tests(n):
    m = build_mesh(n)
    x, y = m.nodes[:, 0], m.nodes[:, 1]
    K = assemble_stiffness(m)
    M = assemble_mass(m)
    assert x @ (K @ x) == pytest.approx(1.0, abs=1e-12)
    u = x + y
    assert np.ones_like(u) @ (M @ u) == pytest.approx(1.0, abs=1e-12)
    # exact for products of linears: int x^2 = 1/3, int x*y = 1/4
    assert x @ (M @ x) == pytest.approx(1 / 3, abs=1e-12)
    assert x @ (M @ y) == pytest.approx(1 / 4, abs=1e-12)
