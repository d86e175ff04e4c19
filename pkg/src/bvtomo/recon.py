"""Alternating half-quadratic reconstruction of the conductivity.

Each outer iteration minimizes J over (u, w, alpha) with the dual weight
omega frozen, then refreshes omega in closed form from |grad alpha|.

With kappa > 1 the functional is unbounded below along w, so the joint
minimization is carried out on its reduced form: for a given alpha the
fields are the direct-problem solutions (u minimizes J, w is the stationary
point of the Neumann part) and J becomes a function of alpha alone. Its
gradient is the alpha-block of :meth:`Problem.grad_alpha` evaluated at
those fields, because the u- and w-derivatives vanish there.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import fem
from .functional import Problem, ReconConfig
from .mesh import TriMesh
from .optimizer import BoxSpec, OptimizerError, SolveReport, minimize
from .regularizer import omega_update
from .synthetic import BoundaryDataSet, InclusionSpec, build_alpha0, build_omega0

log = logging.getLogger(__name__)


class ReconstructionError(RuntimeError):
    pass


@dataclass
class IterationRecord:
    n: int
    J: float
    terms: dict
    alpha_in: float
    alpha_out: float
    omega_min: float
    omega_low_fraction: float
    report: SolveReport


@dataclass
class ReconResult:
    u: np.ndarray
    w: np.ndarray
    alpha: np.ndarray
    omega: np.ndarray
    history: list[IterationRecord] = field(default_factory=list)


class ReducedObjective:
    """J as a function of the nodal conductivity, fields slaved to direct solves."""

    def __init__(self, problem: Problem, omega: np.ndarray):
        self.problem = problem
        self.omega = omega
        self.u = self.w = None

    def solve_fields(self, alpha: np.ndarray):
        p = self.problem
        mesh = p.mesh
        K = fem.assemble_weighted_stiffness(mesh, alpha)
        interior, bnd = mesh.interior_nodes, mesh.boundary_nodes
        Kii = spla.splu(K[interior][:, interior].tocsc())
        Kib = K[interior][:, bnd]
        neumann = fem.NeumannSolver(mesh, K)
        u = np.zeros((p.n_pairs, mesh.n_nodes))
        w = np.empty_like(u)
        for m in range(p.n_pairs):
            # the correction u vanishes on the boundary; u + ext carries the data f
            total = np.zeros(mesh.n_nodes)
            total[bnd] = p.data.f[m]
            total[interior] = Kii.solve(-(Kib @ p.data.f[m]))
            u[m] = total - p.ext[m]
            w[m] = neumann.solve(p.loads[m])
        return u, w

    def __call__(self, alpha: np.ndarray):
        p = self.problem
        u, w = self.solve_fields(alpha)
        et = p.etilde(u, w, alpha)
        value = p.data_term(et) + p.reference_term(alpha) + p.regularization_term(alpha, self.omega)
        grad = p.grad_alpha(u, w, alpha, self.omega, et)
        self.u, self.w = u, w
        return value, grad


def conductivity_box(mesh: TriMesh, cfg: ReconConfig, alpha0: np.ndarray) -> BoxSpec:
    """alpha in [b, c]; delta-zone nodes pinned to their initial value."""
    lower = np.full(mesh.n_nodes, cfg.b)
    upper = np.full(mesh.n_nodes, cfg.c)
    zone = mesh.in_delta_zone
    lower[zone] = upper[zone] = alpha0[zone]
    return BoxSpec(lower, upper)


def _weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    order = np.argsort(values)
    v, c = values[order], np.cumsum(weights[order])
    return float(v[np.searchsorted(c, 0.5 * c[-1])])


def extract_uniform_values(mesh: TriMesh, alpha, inclusion: InclusionSpec, band: float,
                           delta: float | None = None, decimals: int | None = 2):
    """Area-weighted medians of alpha inside and outside the inclusion.

    Nodes within ``band`` of the interface and in the boundary zone are
    ignored. An empty region yields NaN.
    """
    if band < 0:
        raise ValueError("band must be nonnegative")
    alpha = np.asarray(alpha, dtype=float)
    delta = mesh.delta if delta is None else delta
    d = inclusion.distance(mesh.nodes)
    rho = np.hypot(mesh.nodes[:, 0], mesh.nodes[:, 1])
    mass = mesh.lumped_mass
    inside = d < inclusion.radius - band
    outside = (d > inclusion.radius + band) & (rho < mesh.radius - delta)
    out = []
    for name, mask in (("inner", inside), ("outer", outside)):
        if not mask.any():
            log.warning("extract_uniform_values: %s region is empty", name)
            out.append(float("nan"))
            continue
        val = _weighted_median(alpha[mask], mass[mask])
        out.append(round(val, decimals) if decimals is not None else val)
    return tuple(out)


def bv_reconstruct(mesh: TriMesh, data: BoundaryDataSet, cfg: ReconConfig, omega0: np.ndarray,
                   alpha0: np.ndarray, inclusion: InclusionSpec | None = None,
                   band: float | None = None, problem: Problem | None = None) -> ReconResult:
    """Run ``cfg.max_iters`` outer iterations from (alpha0, omega0).

    ``inclusion`` and ``band`` only drive the alpha_in/alpha_out columns of
    the history.
    """
    problem = problem or Problem(mesh, data, cfg)
    spec = cfg.potential
    box = conductivity_box(mesh, cfg, alpha0)
    alpha = np.clip(np.asarray(alpha0, dtype=float), box.lower, box.upper)
    omega = np.asarray(omega0, dtype=float).copy()
    band = mesh.h if band is None else band
    obj = ReducedObjective(problem, omega)
    u, w = obj.solve_fields(alpha)
    result = ReconResult(u, w, alpha, omega)

    for n in range(1, cfg.max_iters + 1):
        obj.omega = omega
        try:
            alpha, report = minimize(obj, alpha, box, tol=cfg.inner_tol, max_evals=cfg.max_evals,
                                     max_step=cfg.max_step)
        except (OptimizerError, RuntimeError) as exc:
            raise ReconstructionError(f"inner minimization failed at iteration {n}: {exc}") from exc
        u, w = obj.solve_fields(alpha)
        grad_norm = np.linalg.norm(fem.element_gradient(mesh, alpha), axis=1)
        omega = omega_update(grad_norm, spec)
        terms = problem.breakdown(u, w, alpha, omega)
        a_in, a_out = (extract_uniform_values(mesh, alpha, inclusion, band)
                       if inclusion is not None else (float("nan"), float("nan")))
        rec = IterationRecord(n, terms["total"], terms, a_in, a_out, float(omega.min()),
                              float(np.mean(omega < 0.5)), report)
        log.info("iter %d J=%.6g alpha_in=%s alpha_out=%s (%s, %d evals)",
                 n, rec.J, a_in, a_out, report.reason, report.evaluations)
        result.history.append(rec)
    result.u, result.w, result.alpha, result.omega = u, w, alpha, omega
    return result


def physical_reconstruct(mesh: TriMesh, data: BoundaryDataSet, cfg: ReconConfig,
                         inclusion: InclusionSpec, ell: float = 0.02,
                         tikhonov: bool = False) -> ReconResult:
    """One iteration from the three-valued initial guess with the exact interface prior."""
    cfg = ReconConfig(**{**cfg.to_dict(), "max_iters": 1,
                         "b": min(cfg.b, 0.5), "c": max(cfg.c, 5.0)})
    omega0 = build_omega0(mesh, inclusion, float("inf") if tikhonov else ell)
    alpha0 = build_alpha0(mesh, "three_valued", inclusion)
    return bv_reconstruct(mesh, data, cfg, omega0, alpha0, inclusion=inclusion)
