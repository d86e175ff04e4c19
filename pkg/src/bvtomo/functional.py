"""Reconstruction functional J_eps(u, w, alpha, omega) and its gradient.

For every measurement pair m there is a Dirichlet correction ``u_m``
(zero on the boundary; the total potential is ``u_m + eta f_m``) and a
Neumann potential ``w_m``. Fields are stored as arrays of shape
(N, n_nodes). The data term is

    E_m = (k+1)/2 int a |grad(u_m + eta f_m)|^2
          + (1-k) [1/2 int a |grad w_m|^2 - <g_m, w_m>] - k <g_m, f_m>

combined as ``sum_m |E_m|`` (or the signed ``E_1`` when requested for a
single pair), plus ``lam/2 sum_{delta zone} m_i (a_i - a0_i)^2`` and
``mu int (omega |grad a|^2 + psi_eps(omega))``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from . import fem
from .mesh import TriMesh
from .regularizer import PotentialSpec, psi_eps
from .synthetic import BoundaryDataSet


@dataclass
class ReconConfig:
    kappa: float = 10.0
    mu: float = 1.0
    lam: float = 0.0
    epsilon: float = 0.1
    b: float = 1.0
    c: float = 3.0
    delta: float = 0.2
    max_iters: int = 10
    inner_tol: float = 1e-6
    max_evals: int = 500
    # cap on the infinity norm of each inner step, in conductivity units
    max_step: float | None = 0.1
    rng_seed: int = 0
    # how the per-pair values E_m enter: "abs" sum |E_m|, "square" sum E_m^2 / 2,
    # "signed" (single pair only) E_1
    data_norm: str = "abs"
    alpha_ref: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("lower conductivity bound b must be positive")
        if self.b > self.c:
            raise ValueError("bounds must satisfy b <= c")
        if self.mu < 0 or self.lam < 0:
            raise ValueError("mu and lam must be nonnegative")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.data_norm not in ("abs", "square", "signed"):
            raise ValueError(f"unknown data_norm {self.data_norm!r}")
        if self.max_step is not None and not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.max_iters < 0 or self.max_evals < 1 or self.inner_tol <= 0:
            raise ValueError("iteration limits and tolerances must be positive")

    @property
    def potential(self) -> PotentialSpec:
        return PotentialSpec(self.epsilon)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("alpha_ref")
        return d


class Problem:
    """Mesh, data and configuration with the quantities every evaluation reuses."""

    def __init__(self, mesh: TriMesh, data: BoundaryDataSet, cfg: ReconConfig):
        self.mesh = mesh
        self.data = data
        self.cfg = cfg
        self.ext = np.array([fem.extend_trace(mesh, f) for f in data.f])
        self.loads = np.array([fem.assemble_boundary_pairing(mesh, g) for g in data.g])
        self.gf = np.einsum("mi,mi->m", self.loads, self.ext)

    @property
    def n_pairs(self) -> int:
        return len(self.data)

    @cached_property
    def alpha_ref(self) -> np.ndarray:
        if self.cfg.alpha_ref is not None:
            return np.asarray(self.cfg.alpha_ref, dtype=float)
        return np.full(self.mesh.n_nodes, self.cfg.b)

    def _fields(self, u, w):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        w = np.atleast_2d(np.asarray(w, dtype=float))
        if u.shape != (self.n_pairs, self.mesh.n_nodes) or w.shape != u.shape:
            raise ValueError("u and w must have shape (N, n_nodes)")
        return u, w

    def etilde_terms(self, u, w, alpha) -> np.ndarray:
        """Per-pair (dirichlet, neumann, constant) contributions, shape (N, 3)."""
        u, w = self._fields(u, w)
        k = self.cfg.kappa
        mesh = self.mesh
        ae = fem.element_weight(mesh, alpha) * mesh.areas
        out = np.empty((self.n_pairs, 3))
        for m in range(self.n_pairs):
            gu = fem.element_gradient(mesh, u[m] + self.ext[m])
            gw = fem.element_gradient(mesh, w[m])
            out[m, 0] = 0.5 * (k + 1) * np.sum(ae * (gu**2).sum(1))
            out[m, 1] = (1 - k) * (0.5 * np.sum(ae * (gw**2).sum(1)) - self.loads[m] @ w[m])
            out[m, 2] = -k * self.gf[m]
        return out

    def etilde(self, u, w, alpha) -> np.ndarray:
        return self.etilde_terms(u, w, alpha).sum(axis=1)

    def _signs(self, et: np.ndarray) -> np.ndarray:
        """Chain factor d(data term)/dE_m."""
        norm = self.cfg.data_norm
        if norm == "signed":
            if self.n_pairs != 1:
                raise ValueError("signed data term is defined for a single pair only")
            return np.ones(1)
        if norm == "square":
            return et.copy()
        return np.sign(et)

    def data_term(self, et: np.ndarray) -> float:
        if self.cfg.data_norm == "square":
            return float(0.5 * np.sum(et * et))
        return float(np.sum(self._signs(et) * et))

    def reference_term(self, alpha) -> float:
        if self.cfg.lam == 0:
            return 0.0
        mask = self.mesh.in_delta_zone
        d = np.asarray(alpha)[mask] - self.alpha_ref[mask]
        return 0.5 * self.cfg.lam * float(np.sum(self.mesh.lumped_mass[mask] * d * d))

    def regularization_term(self, alpha, omega) -> float:
        spec = self.cfg.potential
        mesh = self.mesh
        g2 = (fem.element_gradient(mesh, alpha) ** 2).sum(1)
        # omega^0 may hold 0 on the prior ring: psi is evaluated at the nearest attainable weight
        om = np.asarray(omega, dtype=float)
        psi = psi_eps(np.clip(om, spec.omega_min, spec.omega_max), spec)
        return self.cfg.mu * float(np.sum(mesh.areas * (om * g2 + psi)))

    def breakdown(self, u, w, alpha, omega) -> dict:
        et = self.etilde(u, w, alpha)
        parts = {
            "data": self.data_term(et),
            "reference": self.reference_term(alpha),
            "regularization": self.regularization_term(alpha, omega),
        }
        parts["total"] = parts["data"] + parts["reference"] + parts["regularization"]
        return parts

    def value(self, u, w, alpha, omega) -> float:
        return self.breakdown(u, w, alpha, omega)["total"]

    # ------------------------------------------------------------ gradients

    def grad_alpha(self, u, w, alpha, omega, et=None) -> np.ndarray:
        """Derivative with respect to every nodal conductivity value."""
        u, w = self._fields(u, w)
        mesh, cfg = self.mesh, self.cfg
        k = cfg.kappa
        if et is None:
            et = self.etilde(u, w, alpha)
        signs = self._signs(et)
        per_elem = np.zeros(mesh.n_triangles)
        for m in range(self.n_pairs):
            gu = (fem.element_gradient(mesh, u[m] + self.ext[m]) ** 2).sum(1)
            gw = (fem.element_gradient(mesh, w[m]) ** 2).sum(1)
            per_elem += signs[m] * (0.5 * (k + 1) * gu + 0.5 * (1 - k) * gw)
        grad = np.zeros(mesh.n_nodes)
        # element conductivity is the vertex mean, hence the 1/3
        np.add.at(grad, mesh.triangles.ravel(), np.repeat(per_elem * mesh.areas / 3.0, 3))
        if cfg.mu:
            Kw = fem.assemble_weighted_stiffness(mesh, omega, check_sign=False)
            grad += 2.0 * cfg.mu * (Kw @ np.asarray(alpha, dtype=float))
        if cfg.lam:
            mask = mesh.in_delta_zone
            grad[mask] += cfg.lam * mesh.lumped_mass[mask] * (np.asarray(alpha)[mask] - self.alpha_ref[mask])
        return grad

    def grad_fields(self, u, w, alpha, et=None):
        """Derivatives with respect to u (interior nodes) and w (all nodes, gauge-projected)."""
        u, w = self._fields(u, w)
        k = self.cfg.kappa
        mesh = self.mesh
        K = fem.assemble_weighted_stiffness(mesh, alpha)
        if et is None:
            et = self.etilde(u, w, alpha)
        signs = self._signs(et)
        interior = mesh.interior_nodes
        mass = mesh.lumped_mass
        gu = np.empty((self.n_pairs, len(interior)))
        gw = np.empty((self.n_pairs, mesh.n_nodes))
        for m in range(self.n_pairs):
            gu[m] = signs[m] * (k + 1) * (K @ (u[m] + self.ext[m]))[interior]
            r = signs[m] * (1 - k) * (K @ w[m] - self.loads[m])
            gw[m] = r - mass * (r.sum() / mass.sum())
        return gu, gw


def _problem(mesh, data, cfg):
    return Problem(mesh, data, cfg if cfg is not None else ReconConfig())


def eval_Etilde(mesh: TriMesh, u, w, alpha, f, g, kappa: float = 10.0) -> dict:
    """Single-pair E with its three contributions reported separately."""
    data = BoundaryDataSet(mesh.boundary_angles(), f, g)
    p = Problem(mesh, data, ReconConfig(kappa=kappa))
    terms = p.etilde_terms(u, w, alpha)[0]
    return {"dirichlet": terms[0], "neumann": terms[1], "constant": terms[2], "total": float(terms.sum())}


def eval_J(mesh, u, w, alpha, omega, data: BoundaryDataSet, cfg: ReconConfig | None = None) -> float:
    return _problem(mesh, data, cfg).value(u, w, alpha, omega)


def grad_J(mesh, u, w, alpha, omega, data: BoundaryDataSet, cfg: ReconConfig | None = None):
    """(dJ/du on interior nodes, dJ/dw gauge-projected, dJ/dalpha on free nodes)."""
    p = _problem(mesh, data, cfg)
    et = p.etilde(u, w, alpha)
    gu, gw = p.grad_fields(u, w, alpha, et)
    ga = p.grad_alpha(u, w, alpha, omega, et)
    return gu, gw, ga[~mesh.in_delta_zone]
