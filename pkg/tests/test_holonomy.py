import numpy as np
import pytest
from scipy.linalg import expm

from mlq.holonomy import (
    DomainPath,
    IntegrationError,
    OdeOptions,
    circle_path,
    default_monodromy_circle,
    integrate_at_lambda,
    integrate_frame,
    monodromy,
    unitarizing_gauge,
    validate_path,
)
from mlq.loops import loop_det, loop_eval, twist_check
from mlq.potentials import (
    PoleError,
    make_potential,
    sphere_spec,
    torus_spec,
    trinoid_spec,
)

RNG = np.random.default_rng(99)


def random_su2() -> np.ndarray:
    v = RNG.standard_normal(4)
    v /= np.linalg.norm(v)
    return np.array(
        [[v[0] + 1j * v[1], v[2] + 1j * v[3]], [-v[2] + 1j * v[3], v[0] - 1j * v[1]]]
    )


def test_path_construction_and_segments():
    p = DomainPath.polyline([0.0, 1.0, 1.0 + 1.0j])
    assert p.base == 0.0
    assert p.end == 1.0 + 1.0j
    assert p.segments() == [(0.0, 1.0), (1.0, 1.0 + 1.0j)]
    closed = DomainPath((0.0, 1.0, 1.0j), closed=True)
    assert closed.end == 0.0
    assert closed.segments()[-1] == (1.0j, 0.0)
    with pytest.raises(ValueError):
        DomainPath((0.0, 0.0))
    with pytest.raises(ValueError):
        DomainPath((), closed=False)


def test_circle_path_geometry():
    c = circle_path(1.0, 0.5, n=8, start_angle=np.pi)
    assert c.closed
    assert len(c.vertices) == 8
    assert c.vertices[0] == pytest.approx(0.5 + 0.0j)
    assert all(abs(abs(v - 1.0) - 0.5) < 1e-12 for v in c.vertices)
    with pytest.raises(ValueError):
        circle_path(0.0, -1.0)
    with pytest.raises(ValueError):
        circle_path(0.0, 1.0, n=2)


def test_validate_path_rejects_pole_crossing():
    tri = make_potential(trinoid_spec(1j, 1.0, 1.0, 1.0))
    with pytest.raises(PoleError):
        validate_path(DomainPath.line(-1.0, 2.0), tri)  # crosses both 0 and 1
    validate_path(DomainPath.line(0.5 - 1.0j, 0.5 + 1.0j), tri)  # between them


def test_default_monodromy_circle_radius():
    tri = make_potential(trinoid_spec(1j, 1.0, 1.0, 1.0))
    c = default_monodromy_circle(tri, 0.0)
    assert abs(c.vertices[0]) == pytest.approx(0.5)  # half the distance to z = 1


def test_ode_options_validated():
    with pytest.raises(ValueError):
        OdeOptions(method="euler")
    with pytest.raises(ValueError):
        OdeOptions(tolerance=0.0)
    with pytest.raises(ValueError):
        OdeOptions(step=-1.0)


@pytest.mark.parametrize("method", ["rk45", "rk4"])
def test_sphere_transport_is_exact_polynomial(method):
    # xi = lam^{-1} E12 dz is nilpotent: Phi(z) = I + (z/lam) E12 exactly
    pot = make_potential(sphere_spec())
    opts = OdeOptions(method=method, tolerance=1e-12, step=1e-3)
    z = 0.7 - 0.4j
    for lam in (1.0, np.exp(0.6j), 1j):
        got = integrate_at_lambda(pot, DomainPath.line(0.0, z), lam=lam, opts=opts)
        expected = np.array([[1.0, z / lam], [0.0, 1.0]])
        np.testing.assert_allclose(got, expected, atol=1e-9)


def test_torus_transport_matches_matrix_exponential():
    pot = make_potential(torus_spec())
    opts = OdeOptions(tolerance=1e-12)
    z = 0.9 + 0.3j
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    for lam in (1.0, np.exp(1.1j)):
        got = integrate_at_lambda(pot, DomainPath.line(0.0, z), lam=lam, opts=opts)
        np.testing.assert_allclose(got, expm(z / lam * a), atol=1e-9)


def test_transport_composes_along_paths():
    pot = make_potential(torus_spec())
    opts = OdeOptions(tolerance=1e-12)
    lam = np.exp(0.4j)
    via = integrate_at_lambda(pot, DomainPath.polyline([0.0, 0.5j, 1.0]), lam=lam, opts=opts)
    direct = integrate_at_lambda(pot, DomainPath.line(0.0, 1.0), lam=lam, opts=opts)
    np.testing.assert_allclose(via, direct, atol=1e-9)


def test_monodromy_trivial_for_exact_forms():
    # constant-coefficient xi integrates to zero around any closed loop
    pot = make_potential(torus_spec())
    h = monodromy(pot, circle_path(0.3, 1.1, n=48), np.exp(0.8j), OdeOptions(tolerance=1e-12))
    np.testing.assert_allclose(h, np.eye(2), atol=1e-9)
    with pytest.raises(ValueError):
        monodromy(pot, DomainPath.line(0.0, 1.0), 1.0)


def test_trinoid_monodromy_has_unit_determinant():
    pot = make_potential(trinoid_spec(1j, 1.0, 1.0, 1.0))
    h = monodromy(pot, circle_path(0.0, 0.5, n=64), np.exp(0.3j))
    assert np.linalg.det(h) == pytest.approx(1.0, abs=1e-9)
    # a genuinely nontrivial singularity
    assert np.abs(h - np.eye(2)).max() > 1e-3


def test_integrate_frame_window_and_twist():
    pot = make_potential(sphere_spec())
    loop = integrate_frame(pot, DomainPath.line(0.0, 0.6 + 0.2j), window=8)
    assert loop.k_min == -8
    assert loop.k_max == 8
    assert twist_check(loop).max_violation < 1e-12
    coeffs, k_min = loop_det(loop)
    dev = coeffs.copy()
    dev[-k_min] -= 1.0
    assert np.abs(dev).max() < 1e-8  # det Phi = 1 as a Laurent polynomial


def test_integrate_frame_rejects_pole_paths():
    tri = make_potential(trinoid_spec(1j, 1.0, 1.0, 1.0))
    with pytest.raises(PoleError):
        integrate_frame(tri, DomainPath.line(0.5, 0.0), window=8)


def test_unitarizing_gauge_conjugates_back_to_su2():
    g = np.array([[1.4, 0.3 - 0.2j], [0.1j, 0.8]])
    g_inv = np.linalg.inv(g)
    mats = [g @ random_su2() @ g_inv for _ in range(4)]
    w = unitarizing_gauge(mats)
    w_inv = np.linalg.inv(w)
    for m in mats:
        d = w @ m @ w_inv
        np.testing.assert_allclose(d @ d.conj().T, np.eye(2), atol=1e-8)
