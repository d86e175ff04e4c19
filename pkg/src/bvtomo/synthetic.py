"""Exact solutions, boundary data, noise and initial guesses for the disc tests.

All geometries share a unit-radius inclusion with conductivity 2 inside a
background of conductivity 1, in the disc of radius 2. The eccentric cases
are solved in bipolar coordinates: with foci on the x-axis chosen so that the
outer circle and the inclusion boundary are coordinate lines ``tau = tau1``
and ``tau = tau2``, the potential is ``-k(tau) sin(sigma)`` where ``k`` is
``exp(-tau)`` inside the inclusion and a two-exponential combination outside
that makes both potential and flux continuous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import TriMesh

SQ5, SQ17, SQ10 = np.sqrt(5.0), np.sqrt(17.0), np.sqrt(10.0)
OUTER_RADIUS = 2.0


@dataclass(frozen=True)
class InclusionSpec:
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0
    alpha_in: float = 2.0
    alpha_out: float = 1.0

    def __post_init__(self):
        if np.hypot(*self.center) + self.radius >= OUTER_RADIUS:
            raise ValueError("inclusion must lie inside the open disc")

    def distance(self, xy: np.ndarray) -> np.ndarray:
        """Distance from the inclusion centre."""
        xy = np.asarray(xy, dtype=float)
        return np.hypot(xy[..., 0] - self.center[0], xy[..., 1] - self.center[1])

    def conductivity(self, xy: np.ndarray) -> np.ndarray:
        return np.where(self.distance(xy) < self.radius, self.alpha_in, self.alpha_out)


@dataclass(frozen=True)
class NoiseSpec:
    theta: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("noise level must be nonnegative")


@dataclass
class BoundaryDataSet:
    """Measurement pairs sampled at the mesh boundary nodes.

    ``f`` and ``g`` have shape (N, n_boundary); ``angles`` are the polar
    angles of the boundary nodes in the same order.
    """

    angles: np.ndarray
    f: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        self.f = np.atleast_2d(np.asarray(self.f, dtype=float))
        self.g = np.atleast_2d(np.asarray(self.g, dtype=float))
        if self.f.shape != self.g.shape or self.f.shape[1] != len(self.angles):
            raise ValueError("f, g and angles must agree in shape")

    def __len__(self) -> int:
        return self.f.shape[0]

    def pairs(self):
        return list(zip(self.f, self.g))


CONCENTRIC = InclusionSpec((0.0, 0.0))
STRONG_ECCENTRIC = InclusionSpec(((SQ5 - SQ17) / 2, 0.0))
MILD_ECCENTRIC = InclusionSpec((-1.0 / 3.0, 0.0))
GEOMETRIES = {
    "concentric": CONCENTRIC,
    "strong_eccentric": STRONG_ECCENTRIC,
    "mild_eccentric": MILD_ECCENTRIC,
}


def _polar(x, y):
    return np.hypot(x, y), np.arctan2(y, x)


def _check_inside(rho):
    if np.any(np.asarray(rho) > OUTER_RADIUS * (1 + 1e-12)) or np.any(np.asarray(rho) < 0):
        raise ValueError("evaluation point outside the disc of radius 2")


# ------------------------------------------------------------------ concentric

def concentric_data(phi):
    phi = np.asarray(phi, dtype=float)
    return 1.0 + 11.0 / 4.0 * np.cos(phi), 13.0 / 8.0 * np.cos(phi)


def concentric_exact(rho, phi):
    rho = np.asarray(rho, dtype=float)
    _check_inside(rho)
    safe = np.maximum(rho, 1e-300)
    outer = 1.0 + (1.5 * rho - 0.5 / safe) * np.cos(phi)
    return np.where(rho <= 1.0, 1.0 + rho * np.cos(phi), outer)


# ------------------------------------------------------------------ bipolar

@dataclass(frozen=True)
class _Bipolar:
    a: float
    tau1: float
    tau2: float
    alpha2: float = 2.0

    @property
    def foci(self):
        q = 1.0 - np.exp(-2 * self.tau1)
        return -2 * self.a / q, -2 * self.a * np.exp(-2 * self.tau1) / q

    def coords(self, x, y):
        p1, p2 = self.foci
        z = np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float)
        w = np.log((z - p1) / (z - p2))
        return w.real, w.imag

    def tau(self, rho, phi):
        """Closed-form tau(rho, phi) as a ratio of squared focal distances."""
        a, t1 = self.a, self.tau1
        q = 1 - np.exp(-2 * t1)
        num = rho**2 + 4 * a**2 / q**2 + 4 * a * rho * np.cos(phi) / q
        den = rho**2 + 4 * a**2 * np.exp(-4 * t1) / q**2 + 4 * a * rho * np.cos(phi) * np.exp(-2 * t1) / q
        return 0.5 * np.log(num / den)

    def k_outside(self, tau):
        a2 = self.alpha2
        return 0.5 * (1 + a2) * np.exp(-tau) + 0.5 * (1 - a2) * np.exp(-2 * self.tau2) * np.exp(tau)

    def k_outside_prime(self, tau):
        a2 = self.alpha2
        return -0.5 * (1 + a2) * np.exp(-tau) + 0.5 * (1 - a2) * np.exp(-2 * self.tau2) * np.exp(tau)

    def potential(self, x, y):
        tau, sigma = self.coords(x, y)
        k = np.where(tau > self.tau2, np.exp(-tau), self.k_outside(tau))
        return -k * np.sin(sigma)

    @property
    def s_f(self):
        return float(self.k_outside(self.tau1))

    @property
    def s_g(self):
        return float(-self.k_outside_prime(self.tau1))


STRONG = _Bipolar(0.5, np.log((SQ17 + 1) / 4), np.log((SQ5 + 1) / 2))
MILD = _Bipolar(4.0 / 3.0 * SQ10, np.log((2 * SQ10 + 7) / 3), np.log((4 * SQ10 + 13) / 3))


def strong_eccentric_data(phi):
    phi = np.asarray(phi, dtype=float)
    d = SQ17 + 4 * np.cos(phi)
    return STRONG.s_f * np.sin(phi) / d, STRONG.s_g * 0.5 * np.sin(phi) / d**2


def strong_eccentric_exact(rho, phi):
    rho = np.asarray(rho, dtype=float)
    _check_inside(rho)
    return STRONG.potential(rho * np.cos(phi), rho * np.sin(phi))


def strong_eccentric_exact_polar(rho, phi):
    """The same potential written with the quartic normalisation in (rho, phi).

    Kept as an independent transcription to cross-check the bipolar form.
    """
    rho = np.asarray(rho, dtype=float)
    _check_inside(rho)
    c1 = 2 * SQ17 * np.cos(phi)
    c2 = 17 + 8 * np.cos(2 * phi)
    c3 = 8 * SQ17 * np.cos(phi)
    pre = (rho**4 + c1 * rho**3 + c2 * rho**2 + c3 * rho + 16) ** -0.5 * rho * np.sin(phi)
    tau = STRONG.tau(rho, phi)
    return np.where(tau > STRONG.tau2, np.exp(-tau), STRONG.k_outside(tau)) * pre


def mild_eccentric_data(phi):
    phi = np.asarray(phi, dtype=float)
    d = 28.0 / 3.0 + 4 * np.cos(phi)
    f = MILD.s_f * (8.0 / 3.0 * SQ10 * np.sin(phi)) / d
    g = MILD.s_g * 320.0 / 9.0 * np.sin(phi) / d**2
    return f, g


def mild_eccentric_exact(rho, phi):
    rho = np.asarray(rho, dtype=float)
    _check_inside(rho)
    return MILD.potential(rho * np.cos(phi), rho * np.sin(phi))


EXACT = {
    "concentric": concentric_exact,
    "strong_eccentric": strong_eccentric_exact,
    "mild_eccentric": mild_eccentric_exact,
}
DATA = {
    "concentric": concentric_data,
    "strong_eccentric": strong_eccentric_data,
    "mild_eccentric": mild_eccentric_data,
}


def exact_xy(geometry: str):
    fn = EXACT[geometry]

    def u(x, y):
        rho, phi = _polar(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return fn(np.minimum(rho, OUTER_RADIUS), phi)

    return u


# ------------------------------------------------------------------ multi-data

def multiharmonic_data(m: int, phi):
    if m < 1:
        raise ValueError("harmonic index must be >= 1")
    phi = np.asarray(phi, dtype=float)
    amp = 13.0 / 8.0 * (3 * 2 ** (2 * m + 1) - 2) / (m * (3 * 2 ** (2 * m) + 1))
    return 1.0 + amp * np.cos(m * phi), 13.0 / 8.0 * np.cos(m * phi)


def multiharmonic_exact(m: int, rho, phi):
    rho = np.asarray(rho, dtype=float)
    _check_inside(rho)
    den = m * (3 * 2 ** (2 * m) + 1)
    inner = 2 ** (m + 2) / den * rho**m
    outer = 2 ** (m + 1) / den * (3 * rho**m - np.maximum(rho, 1e-300) ** (-m))
    return 1.0 + 13.0 / 8.0 * np.where(rho <= 1, inner, outer) * np.cos(m * phi)


def make_dataset(mesh: TriMesh, geometry: str, n_pairs: int = 1) -> BoundaryDataSet:
    """Exact boundary data at the mesh boundary nodes."""
    phi = mesh.boundary_angles()
    if n_pairs == 1:
        f, g = DATA[geometry](phi)
        return BoundaryDataSet(phi, f, g)
    if geometry != "concentric":
        raise ValueError("multiple data pairs are defined for the concentric geometry only")
    fg = [multiharmonic_data(m, phi) for m in range(1, n_pairs + 1)]
    return BoundaryDataSet(phi, [p[0] for p in fg], [p[1] for p in fg])


def add_noise(data: BoundaryDataSet, spec: NoiseSpec) -> BoundaryDataSet:
    """Perturb each f nodewise by |f| U theta with U uniform on (-1, 1); g is kept."""
    if spec.theta == 0:
        return BoundaryDataSet(data.angles.copy(), data.f.copy(), data.g.copy())
    rng = np.random.Generator(np.random.PCG64(spec.rng_seed))
    r = rng.uniform(-1.0, 1.0, size=data.f.shape)
    return BoundaryDataSet(data.angles.copy(), data.f + np.abs(data.f) * r * spec.theta, data.g.copy())


# ------------------------------------------------------------------ initial guesses

TIKHONOV = float("inf")


def build_omega0(mesh: TriMesh, inclusion: InclusionSpec, ell: float) -> np.ndarray:
    """Ring-shaped dual weight: 0 on triangles whose centroid is within ell/2 of the interface.

    ``ell = inf`` (:data:`TIKHONOV`) gives the constant weight 1.
    """
    if ell < 0:
        raise ValueError("ring width must be nonnegative")
    if np.isinf(ell):
        return np.ones(mesh.n_triangles)
    d = np.abs(inclusion.distance(mesh.centroids) - inclusion.radius)
    return np.where(d <= ell / 2, 0.0, 1.0)


def build_alpha0(mesh: TriMesh, mode: str, inclusion: InclusionSpec = CONCENTRIC,
                 ell: float = 0.0, b: float = 1.0) -> np.ndarray:
    """Initial conductivity; delta-zone nodes always get the background value b."""
    d = inclusion.distance(mesh.nodes)
    if mode == "banded":
        alpha = np.where(d > inclusion.radius + ell / 2, 1.0, 2.5)
    elif mode == "constant":
        alpha = np.full(mesh.n_nodes, 2.5)
    elif mode == "three_valued":
        alpha = np.where(d < inclusion.radius, 5.0, 0.5)
        b = 1.0
    else:
        raise ValueError(f"unknown initial-guess mode {mode!r}")
    alpha[mesh.in_delta_zone] = b
    return alpha
