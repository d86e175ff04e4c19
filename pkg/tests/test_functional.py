import numpy as np
import pytest

from bvtomo import fem
from bvtomo.functional import Problem, ReconConfig, eval_Etilde, eval_J, grad_J
from bvtomo.mesh import generate_disc_mesh
from bvtomo.regularizer import omega_update, psi_eps
from bvtomo.synthetic import CONCENTRIC, GEOMETRIES, make_dataset


def direct_fields(mesh, data, alpha):
    u = np.array([fem.solve_dirichlet(mesh, alpha, f) - fem.extend_trace(mesh, f) for f in data.f])
    w = np.array([fem.solve_neumann(mesh, alpha, g) for g in data.g])
    return u, w


def random_point(mesh, n_pairs, rng):
    u = rng.standard_normal((n_pairs, mesh.n_nodes))
    u[:, mesh.boundary_nodes] = 0
    w = rng.standard_normal((n_pairs, mesh.n_nodes))
    alpha = rng.uniform(1.0, 3.0, mesh.n_nodes)
    alpha[mesh.in_delta_zone] = 1.0
    omega = rng.uniform(0.1, 0.99, mesh.n_triangles)
    return u, w, alpha, omega


def test_config_validation():
    for bad in ({"b": 0}, {"b": 2, "c": 1}, {"mu": -1}, {"lam": -1}, {"epsilon": 1.0},
                {"data_norm": "l2"}, {"max_step": 0.0}, {"inner_tol": 0}):
        with pytest.raises(ValueError):
            ReconConfig(**bad)
    assert "alpha_ref" not in ReconConfig().to_dict()


def test_etilde_without_boundary_data(disc, rng):
    nb = len(disc.boundary_nodes)
    u = rng.standard_normal(disc.n_nodes)
    u[disc.boundary_nodes] = 0
    w = rng.standard_normal(disc.n_nodes)
    alpha = rng.uniform(1, 2, disc.n_nodes)
    K = fem.assemble_weighted_stiffness(disc, alpha)
    out = eval_Etilde(disc, u, w, alpha, np.zeros(nb), np.zeros(nb), kappa=10)
    assert out["total"] == pytest.approx(5.5 * u @ K @ u - 4.5 * w @ K @ w, rel=1e-12)
    twice = eval_Etilde(disc, u, w, 2 * alpha, np.zeros(nb), np.zeros(nb), kappa=10)
    assert twice["dirichlet"] == pytest.approx(2 * out["dirichlet"], rel=1e-14)
    assert twice["neumann"] == pytest.approx(2 * out["neumann"], rel=1e-14)


def test_etilde_at_unit_conductivity_closed_form(disc):
    # E = 2 pi / 32 * (11/2 * 121 + 9/2 * 169 - 10 * 143) = -pi / 4
    data = make_dataset(disc, "concentric")
    alpha = np.ones(disc.n_nodes)
    u, w = direct_fields(disc, data, alpha)
    e = eval_Etilde(disc, u[0], w[0], alpha, data.f[0], data.g[0])["total"]
    assert e == pytest.approx(-np.pi / 4, abs=0.02)


def test_etilde_vanishes_at_truth_under_refinement():
    vals = []
    for h in (0.27, 0.15, 0.08):
        m = generate_disc_mesh(2.0, h)
        data = make_dataset(m, "concentric")
        alpha = CONCENTRIC.conductivity(m.centroids).astype(float)
        u, w = direct_fields(m, data, alpha)
        vals.append(abs(eval_Etilde(m, u[0], w[0], alpha, data.f[0], data.g[0])["total"]))
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 0.02


def test_data_term_conventions(disc):
    data = make_dataset(disc, "concentric", 2)
    p = Problem(disc, data, ReconConfig())
    assert p.data_term(np.array([-3.0, 4.0])) == 7.0
    sq = Problem(disc, data, ReconConfig(data_norm="square"))
    assert sq.data_term(np.array([-3.0, 4.0])) == 12.5
    with pytest.raises(ValueError):
        Problem(disc, data, ReconConfig(data_norm="signed"))._signs(np.array([1.0, 2.0]))


def test_J_reduces_to_etilde(disc, rng):
    data = make_dataset(disc, "concentric")
    u, w, alpha, omega = random_point(disc, 1, rng)
    e = eval_Etilde(disc, u[0], w[0], alpha, data.f[0], data.g[0])["total"]
    cfg = ReconConfig(mu=0, data_norm="signed")
    assert eval_J(disc, u, w, alpha, omega, data, cfg) == pytest.approx(e, rel=1e-12)
    assert eval_J(disc, u, w, alpha, omega, data, ReconConfig(mu=0)) == pytest.approx(abs(e), rel=1e-12)


def test_constant_alpha_leaves_only_psi(disc, rng):
    data = make_dataset(disc, "concentric")
    cfg = ReconConfig(mu=0.7)
    p = Problem(disc, data, cfg)
    omega = rng.uniform(0.2, 0.9, disc.n_triangles)
    reg = p.regularization_term(np.full(disc.n_nodes, 1.7), omega)
    assert reg == pytest.approx(0.7 * np.sum(disc.areas * psi_eps(omega, cfg.potential)), rel=1e-12)


def test_reference_term(disc_delta, rng):
    data = make_dataset(disc_delta, "concentric")
    ref = np.full(disc_delta.n_nodes, 1.0)
    p = Problem(disc_delta, data, ReconConfig(lam=2.0, alpha_ref=ref))
    alpha = np.full(disc_delta.n_nodes, 1.5)
    mask = disc_delta.in_delta_zone
    assert p.reference_term(alpha) == pytest.approx(0.25 * disc_delta.lumped_mass[mask].sum())


@pytest.mark.parametrize("geometry,n_pairs", [("concentric", 1), ("concentric", 2), ("concentric", 5),
                                              ("strong_eccentric", 1), ("mild_eccentric", 1)])
def test_gradient_matches_central_differences(coarse, geometry, n_pairs, rng):
    mesh = coarse
    data = make_dataset(mesh, geometry, n_pairs)
    cfg = ReconConfig(mu=0.5, lam=0.3)
    free = ~mesh.in_delta_zone
    interior = mesh.interior_nodes
    mass = mesh.lumped_mass
    worst = 0.0
    for _ in range(5):
        u, w, alpha, omega = random_point(mesh, n_pairs, rng)
        gu, gw, ga = grad_J(mesh, u, w, alpha, omega, data, cfg)
        du = np.zeros_like(u)
        du[:, interior] = rng.standard_normal((n_pairs, len(interior)))
        dw = rng.standard_normal(w.shape)
        dw -= np.outer((dw @ mass) / mass.sum(), np.ones(mesh.n_nodes))
        da = np.zeros(mesh.n_nodes)
        da[free] = rng.standard_normal(free.sum())
        analytic = np.sum(gu * du[:, interior]) + np.sum(gw * dw) + ga @ da[free]
        step = 1e-6
        jp = eval_J(mesh, u + step * du, w + step * dw, alpha + step * da, omega, data, cfg)
        jm = eval_J(mesh, u - step * du, w - step * dw, alpha - step * da, omega, data, cfg)
        fd = (jp - jm) / (2 * step)
        worst = max(worst, abs(fd - analytic) / abs(fd))
    assert worst <= 1e-5


def test_field_gradients_vanish_at_direct_solutions(disc, rng):
    data = make_dataset(disc, "concentric", 2)
    alpha = rng.uniform(1, 3, disc.n_nodes)
    u, w = direct_fields(disc, data, alpha)
    omega = np.ones(disc.n_triangles)
    gu, gw, _ = grad_J(disc, u, w, alpha, omega, data, ReconConfig())
    assert np.abs(gu).max() < 1e-8 and np.abs(gw).max() < 1e-8


def test_alpha_gradient_vanishes_without_data(disc):
    nb = len(disc.boundary_nodes)
    from bvtomo.synthetic import BoundaryDataSet
    data = BoundaryDataSet(disc.boundary_angles(), np.zeros(nb), np.zeros(nb))
    z = np.zeros((1, disc.n_nodes))
    _, _, ga = grad_J(disc, z, z, np.full(disc.n_nodes, 1.3), np.ones(disc.n_triangles), data,
                      ReconConfig(mu=0))
    assert np.abs(ga).max() == 0


def test_omega_step_never_increases_J(disc, rng):
    data = make_dataset(disc, "concentric")
    cfg = ReconConfig(mu=1.0)
    for _ in range(3):
        u, w, alpha, omega = random_point(disc, 1, rng)
        new = omega_update(np.linalg.norm(fem.element_gradient(disc, alpha), axis=1), cfg.potential)
        assert eval_J(disc, u, w, alpha, new, data, cfg) <= eval_J(disc, u, w, alpha, omega, data, cfg) + 1e-10


def test_descent_along_negative_gradient(disc, rng):
    data = make_dataset(disc, "strong_eccentric")
    cfg = ReconConfig(mu=0.1)
    u, w, alpha, omega = random_point(disc, 1, rng)
    gu, gw, ga = grad_J(disc, u, w, alpha, omega, data, cfg)
    free = ~disc.in_delta_zone
    j0 = eval_J(disc, u, w, alpha, omega, data, cfg)
    t = 1e-7
    u2 = u.copy()
    u2[:, disc.interior_nodes] -= t * gu
    a2 = alpha.copy()
    a2[free] -= t * ga
    assert eval_J(disc, u2, w - t * gw, a2, omega, data, cfg) < j0


@pytest.mark.parametrize("kappa", [-0.5, 0.0, 0.7, 10.0])
def test_decomposition_identity(disc, rng, kappa):
    data = make_dataset(disc, "concentric")
    alpha = rng.uniform(1, 3, disc.n_nodes)
    ua, wa = direct_fields(disc, data, alpha)
    du = rng.standard_normal(disc.n_nodes)
    du[disc.boundary_nodes] = 0
    dw = rng.standard_normal(disc.n_nodes)
    e = lambda u, w: eval_Etilde(disc, u, w, alpha, data.f[0], data.g[0], kappa)["total"]
    K = fem.assemble_weighted_stiffness(disc, alpha)
    lhs = e(ua[0] + du, wa[0] + dw) - e(ua[0], wa[0])
    rhs = 0.5 * (kappa + 1) * du @ K @ du + 0.5 * (1 - kappa) * dw @ K @ dw
    assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-8)
    if -1 < kappa < 1:
        assert lhs >= 0
