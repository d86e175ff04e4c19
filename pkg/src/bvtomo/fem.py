"""P1 finite-element operators on a :class:`~bvtomo.mesh.TriMesh`.

Nodal fields are plain 1-D arrays of length ``mesh.n_nodes``; element
fields have length ``mesh.n_triangles``. Boundary data (Dirichlet traces,
flux densities) are arrays ordered like ``mesh.boundary_nodes``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import TriMesh


class SolverError(RuntimeError):
    pass


class CompatibilityError(ValueError):
    pass


def shape_gradients(mesh: TriMesh) -> np.ndarray:
    """Gradients of the three barycentric basis functions, shape (n_tri, 3, 2)."""
    cache = mesh._cache
    if "grads" not in cache:
        p = mesh.nodes[mesh.triangles]
        x, y = p[..., 0], p[..., 1]
        two_a = 2.0 * mesh.areas
        # grad(lambda_i) = (y_j - y_k, x_k - x_j) / 2A with (i, j, k) cyclic
        g = np.empty((mesh.n_triangles, 3, 2))
        for i, (j, k) in enumerate(((1, 2), (2, 0), (0, 1))):
            g[:, i, 0] = (y[:, j] - y[:, k]) / two_a
            g[:, i, 1] = (x[:, k] - x[:, j]) / two_a
        cache["grads"] = g
    return cache["grads"]


def element_gradient(mesh: TriMesh, v: np.ndarray) -> np.ndarray:
    """Per-triangle gradient of a P1 field, shape (n_tri, 2)."""
    v = np.asarray(v, dtype=float)
    return np.einsum("tij,ti->tj", shape_gradients(mesh), v[mesh.triangles])


def element_weight(mesh: TriMesh, weight) -> np.ndarray:
    """Element values of a weight given per node (mean of the vertices) or per element."""
    w = np.asarray(weight, dtype=float)
    if w.ndim == 0:
        return np.full(mesh.n_triangles, float(w))
    if w.shape == (mesh.n_nodes,):
        return w[mesh.triangles].mean(axis=1)
    if w.shape == (mesh.n_triangles,):
        return w
    raise ValueError(f"weight has length {w.shape}, expected {mesh.n_nodes} or {mesh.n_triangles}")


def _local_stiffness(mesh: TriMesh) -> np.ndarray:
    if "klocal" not in mesh._cache:
        g = shape_gradients(mesh)
        mesh._cache["klocal"] = mesh.areas[:, None, None] * np.einsum("tik,tjk->tij", g, g)
    return mesh._cache["klocal"]


def assemble_weighted_stiffness(mesh: TriMesh, weight=1.0, check_sign: bool = True) -> sp.csr_matrix:
    """Stiffness matrix of v -> int weight |grad v|^2 (so v^T K v is the energy)."""
    we = element_weight(mesh, weight)
    if check_sign and np.any(we < 0):
        raise ValueError("stiffness weight must be nonnegative")
    vals = (we[:, None, None] * _local_stiffness(mesh)).ravel()
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_nodes
    K = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    # exact symmetry regardless of summation order
    return ((K + K.T) * 0.5).tocsr()


def boundary_edge_lengths(mesh: TriMesh) -> np.ndarray:
    e = mesh.nodes[mesh.boundary_edges[:, 1]] - mesh.nodes[mesh.boundary_edges[:, 0]]
    return np.hypot(e[:, 0], e[:, 1])


def boundary_weights(mesh: TriMesh) -> np.ndarray:
    """Trapezoidal quadrature weight of each boundary node (half of each adjacent edge)."""
    ln = boundary_edge_lengths(mesh)
    return 0.5 * (ln + np.roll(ln, 1))


def assemble_boundary_pairing(mesh: TriMesh, g) -> np.ndarray:
    """Nodal vector L with L @ w approximating the boundary integral of g*w."""
    g = np.broadcast_to(np.asarray(g, dtype=float), mesh.boundary_nodes.shape)
    L = np.zeros(mesh.n_nodes)
    L[mesh.boundary_nodes] = boundary_weights(mesh) * g
    return L


def boundary_integral(mesh: TriMesh, g) -> float:
    return float(assemble_boundary_pairing(mesh, g).sum())


def check_compatible(mesh: TriMesh, g, rtol: float = 1e-8) -> None:
    g = np.asarray(g, dtype=float)
    total = boundary_integral(mesh, g)
    scale = max(np.abs(g).max(), 1e-300) * boundary_edge_lengths(mesh).sum()
    if abs(total) > rtol * scale:
        raise CompatibilityError(
            f"flux data violates the compatibility condition: boundary integral {total:.3e}"
        )


def _dirichlet_solve(mesh: TriMesh, K: sp.csr_matrix, f) -> np.ndarray:
    f = np.broadcast_to(np.asarray(f, dtype=float), mesh.boundary_nodes.shape)
    interior = mesh.interior_nodes
    bnd = mesh.boundary_nodes
    u = np.zeros(mesh.n_nodes)
    u[bnd] = f
    if len(interior):
        Kii = K[interior][:, interior].tocsc()
        rhs = -(K[interior][:, bnd] @ f)
        try:
            u[interior] = spla.spsolve(Kii, rhs)
        except RuntimeError as exc:  # singular factor
            raise SolverError(f"Dirichlet solve failed: {exc}") from exc
        res = np.linalg.norm(Kii @ u[interior] - rhs)
        if not np.all(np.isfinite(u)) or res > 1e-8 * max(np.linalg.norm(rhs), 1e-300):
            raise SolverError(f"Dirichlet solve failed: residual {res:.3e}")
    return u


def extend_trace(mesh: TriMesh, f) -> np.ndarray:
    """Discrete harmonic extension of boundary values ``f``."""
    return _dirichlet_solve(mesh, assemble_weighted_stiffness(mesh, 1.0), f)


def solve_dirichlet(mesh: TriMesh, alpha, f) -> np.ndarray:
    """Total potential u + eta f solving div(alpha grad u) = 0 with trace f."""
    return _dirichlet_solve(mesh, assemble_weighted_stiffness(mesh, alpha), f)


class NeumannSolver:
    """Factorized zero-mean Neumann problem for one conductivity.

    The quotient space is fixed by the lumped-mass mean constraint, imposed
    with a single Lagrange multiplier.
    """

    def __init__(self, mesh: TriMesh, K: sp.csr_matrix):
        m = mesh.lumped_mass
        n = mesh.n_nodes
        A = sp.bmat([[K, sp.csr_matrix(m[:, None])], [sp.csr_matrix(m[None, :]), None]], format="csc")
        try:
            self._lu = spla.splu(A)
        except RuntimeError as exc:
            raise SolverError(f"Neumann system is singular: {exc}") from exc
        self.K = K
        self.n = n

    def solve(self, load: np.ndarray) -> np.ndarray:
        rhs = np.append(load, 0.0)
        sol = self._lu.solve(rhs)
        w = sol[: self.n]
        res = np.linalg.norm(self.K @ w - load)
        if not np.all(np.isfinite(w)) or res > 1e-9 * max(np.linalg.norm(load), 1e-300):
            raise SolverError(f"Neumann solve failed: residual {res:.3e}")
        return w


def solve_neumann(mesh: TriMesh, alpha, g) -> np.ndarray:
    """Zero-mean solution of div(alpha grad w) = 0 with alpha dw/dn = g."""
    check_compatible(mesh, g)
    L = assemble_boundary_pairing(mesh, g)
    if not np.any(L):
        return np.zeros(mesh.n_nodes)
    return NeumannSolver(mesh, assemble_weighted_stiffness(mesh, alpha)).solve(L)


def energy(mesh: TriMesh, alpha, v) -> float:
    """Weighted Dirichlet energy v^T K_alpha v."""
    v = np.asarray(v, dtype=float)
    grad = element_gradient(mesh, v)
    return float(np.sum(element_weight(mesh, alpha) * mesh.areas * (grad**2).sum(axis=1)))


def l2_error(mesh: TriMesh, v: np.ndarray, exact) -> float:
    """L2 norm of (P1 field - exact function) using the edge-midpoint rule.

    ``exact`` is called with arrays (x, y). The three-point midpoint rule
    integrates quadratics exactly on each triangle.
    """
    tri = mesh.triangles
    p = mesh.nodes[tri]
    vt = np.asarray(v)[tri]
    total = np.zeros(mesh.n_triangles)
    for a, b in ((0, 1), (1, 2), (2, 0)):
        mid = 0.5 * (p[:, a] + p[:, b])
        diff = 0.5 * (vt[:, a] + vt[:, b]) - exact(mid[:, 0], mid[:, 1])
        total += diff**2
    return float(np.sqrt(np.sum(mesh.areas * total / 3.0)))


def h1_seminorm_error(mesh: TriMesh, v: np.ndarray, exact, step: float = 1e-6) -> float:
    """L2 norm of grad(v - exact), exact gradient by central differences.

    Uses the interior three-point rule (barycentric 2/3, 1/6, 1/6) so no
    quadrature point sits on an edge, where a kinked exact solution may be
    sampled on the wrong side of a curved interface.
    """
    p = mesh.nodes[mesh.triangles]
    gv = element_gradient(mesh, v)
    total = np.zeros(mesh.n_triangles)
    for k in range(3):
        x, y = (p.sum(axis=1) / 6.0 + 0.5 * p[:, k]).T
        gx = (exact(x + step, y) - exact(x - step, y)) / (2 * step)
        gy = (exact(x, y + step) - exact(x, y - step)) / (2 * step)
        total += (gv[:, 0] - gx) ** 2 + (gv[:, 1] - gy) ** 2
    return float(np.sqrt(np.sum(total * mesh.areas / 3.0)))
