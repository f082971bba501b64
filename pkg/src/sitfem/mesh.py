"""Structured P1 triangulation of the unit square and FE matrix assembly."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

# reference P1 mass matrix on a triangle, to be scaled by area/12
_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]])


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh of (0,1)^2 with ``n`` cells per side.

    Nodes are numbered lexicographically: node ``j*(n+1) + i`` sits at
    ``(i/n, j/n)``. Each cell is cut along its lower-left to upper-right
    diagonal.
    """

    n: int
    nodes: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    def node_index(self, i: int, j: int) -> int:
        return j * (self.n + 1) + i

    def diagonal_nodes(self) -> np.ndarray:
        """Indices of the nodes (k/n, k/n), k = 0..n."""
        k = np.arange(self.n + 1)
        return k * (self.n + 1) + k

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def build_mesh(n: int) -> Mesh:
    if int(n) != n or n < 1:
        raise ValueError(f"mesh subdivisions must be a positive integer, got {n!r}")
    n = int(n)
    s = np.linspace(0.0, 1.0, n + 1)
    x, y = np.meshgrid(s, s)  # rows indexed by y
    nodes = np.column_stack([x.ravel(), y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    ll = (j * (n + 1) + i).ravel()
    lr = ll + 1
    ul = ll + (n + 1)
    ur = ul + 1
    # both triangles counter-clockwise, sharing the ll-ur diagonal
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper
    nodes.setflags(write=False)
    triangles.setflags(write=False)
    return Mesh(n=n, nodes=nodes, triangles=triangles)


def _assemble(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    """Scatter per-element 3x3 blocks ``local`` (shape (T,3,3)) into CSR."""
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    N = mesh.num_nodes
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(N, N)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix, entries int(phi_i phi_j)."""
    area = mesh.signed_areas()
    local = area[:, None, None] / 12.0 * _MASS_REF[None, :, :]
    return _assemble(mesh, local)


def assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """P1 stiffness matrix, entries int(grad phi_i . grad phi_j)."""
    p = mesh.nodes[mesh.triangles]  # (T, 3, 2)
    area = mesh.signed_areas()
    # gradient of barycentric coordinate i is rot90 of the opposite edge / (2A)
    e = np.stack(
        [p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1
    )  # (T, 3, 2)
    local = np.einsum("tik,tjk->tij", e, e) / (4.0 * area[:, None, None])
    A = _assemble(mesh, local)
    # exact zeros where cancellations leave round-off
    A.data[np.abs(A.data) < 1e-15] = 0.0
    A.eliminate_zeros()
    return A
