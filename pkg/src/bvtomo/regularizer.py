"""Edge-preserving potential, its quadratic-tail smoothing and half-quadratic dual.

The base potential is ``phi(s) = 2 (sqrt(1 + s^2) - 1)``: convex,
nondecreasing, ``phi(sqrt(s))`` concave, linear growth with slope 2, and
``phi'(s) / 2s -> 1`` at the origin so the dual weight is 1 on flat regions.

``phi_eps`` replaces ``phi`` by matching quadratics on ``[0, eps]`` and
``[1/eps, inf)``. Writing ``phi_eps(s) = inf_w (w s^2 + psi_eps(w))`` the
optimal weight is ``w = phi_eps'(s) / 2s``, clamped between
``omega_min = eps phi'(1/eps) / 2`` and ``omega_max = phi'(eps) / 2 eps``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _phi(s):
    return 2.0 * (np.sqrt(1.0 + s * s) - 1.0)


def _dphi(s):
    return 2.0 * s / np.sqrt(1.0 + s * s)


POTENTIALS = {"charbonnier2": (_phi, _dphi)}


@dataclass(frozen=True)
class PotentialSpec:
    epsilon: float = 0.1
    phi_id: str = "charbonnier2"

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.phi_id not in POTENTIALS:
            raise ValueError(f"unknown potential {self.phi_id!r}")

    @property
    def omega_max(self) -> float:
        e = self.epsilon
        return float(POTENTIALS[self.phi_id][1](e) / (2 * e))

    @property
    def omega_min(self) -> float:
        e = self.epsilon
        return float(e * POTENTIALS[self.phi_id][1](1.0 / e) / 2)


DEFAULT = PotentialSpec()


def phi(s, spec: PotentialSpec = DEFAULT):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("phi is defined for s >= 0")
    return POTENTIALS[spec.phi_id][0](s)


def dphi(s, spec: PotentialSpec = DEFAULT):
    return POTENTIALS[spec.phi_id][1](np.asarray(s, dtype=float))


def phi_eps(s, spec: PotentialSpec = DEFAULT):
    s = np.asarray(s, dtype=float)
    f, df = POTENTIALS[spec.phi_id]
    e, E = spec.epsilon, 1.0 / spec.epsilon
    low = df(e) / (2 * e) * s * s + f(e) - e * df(e) / 2
    high = e * df(E) / 2 * s * s + f(E) - df(E) / (2 * e)
    return np.where(s <= e, low, np.where(s <= E, f(s), high))


def dphi_eps(s, spec: PotentialSpec = DEFAULT):
    s = np.asarray(s, dtype=float)
    df = POTENTIALS[spec.phi_id][1]
    e, E = spec.epsilon, 1.0 / spec.epsilon
    return np.where(s <= e, df(e) / e * s, np.where(s <= E, df(s), e * df(E) * s))


def omega_update(grad_norm, spec: PotentialSpec = DEFAULT):
    """Closed-form minimizing dual weight phi_eps'(s) / 2s, elementwise."""
    s = np.asarray(grad_norm, dtype=float)
    if np.any(s < 0):
        raise ValueError("gradient norms must be nonnegative")
    df = POTENTIALS[spec.phi_id][1]
    e, E = spec.epsilon, 1.0 / spec.epsilon
    mid = df(np.clip(s, e, E)) / (2 * np.clip(s, e, E))
    return np.where(s <= e, spec.omega_max, np.where(s <= E, mid, spec.omega_min))


def _inverse_omega(omega: np.ndarray, spec: PotentialSpec) -> np.ndarray:
    """s* on [eps, 1/eps] with phi'(s*)/(2 s*) = omega, by bisection."""
    lo = np.full(omega.shape, spec.epsilon)
    hi = np.full(omega.shape, 1.0 / spec.epsilon)
    df = POTENTIALS[spec.phi_id][1]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        # omega_update is decreasing in s
        above = df(mid) / (2 * mid) > omega
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        if np.all(hi - lo <= 1e-13 * hi):
            break
    return 0.5 * (lo + hi)


def psi_eps(omega, spec: PotentialSpec = DEFAULT):
    """Dual function with phi_eps(s) = min_w (w s^2 + psi_eps(w))."""
    w = np.asarray(omega, dtype=float)
    tol = 1e-12
    if np.any(w < spec.omega_min * (1 - tol)) or np.any(w > spec.omega_max * (1 + tol)):
        raise ValueError(
            f"omega outside attainable range [{spec.omega_min:.6g}, {spec.omega_max:.6g}]"
        )
    w = np.clip(w, spec.omega_min, spec.omega_max)
    s = _inverse_omega(w, spec)
    # the endpoints are attained on whole intervals of s; any point there works
    s = np.where(w >= spec.omega_max, 0.0, s)
    s = np.where(w <= spec.omega_min, 1.0 / spec.epsilon, s)
    return phi_eps(s, spec) - w * s * s
