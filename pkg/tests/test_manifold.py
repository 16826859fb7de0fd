import math

import numpy as np
import pytest

from geodlab.errors import DomainError, InputError
from geodlab.manifold import (
    connect,
    connect_many,
    distance,
    geodesic_flow,
    make_manifold,
    parallel_transport,
)

from conftest import circle_samples, random_unit_tangent, surface_point


def test_flow_quarter_great_circle(sphere):
    p = sphere.point([0.0, 0.0, 1.0])
    q, v = geodesic_flow(sphere, p, np.array([1.0, 0.0, 0.0]), math.pi / 2)
    assert np.allclose(q.coords, [1.0, 0.0, 0.0], atol=1e-9)
    assert np.allclose(v, [0.0, 0.0, -1.0], atol=1e-9)


def test_flow_flat_torus_wraparound(flat_torus):
    p = flat_torus.point([0.1, 0.2])
    q, v = geodesic_flow(flat_torus, p, np.array([1.0, 0.0]), 0.95)
    assert np.allclose(q.coords, [0.05, 0.2], atol=1e-14)
    assert np.allclose(v, [1.0, 0.0])


def test_flow_ellipsoid_step_halving_oracle(ellipsoid):
    # reference integration at 10x finer step
    p = ellipsoid.point([1.0, 0.0, 0.0])
    v = np.array([0.0, 1.0, 0.0])
    v /= np.linalg.norm(v)
    q, _ = geodesic_flow(ellipsoid, p, v, 0.3)
    q_ref, _ = geodesic_flow(ellipsoid, p, v, 0.3, n_steps=3200)
    assert np.linalg.norm(q.coords - q_ref.coords) <= 1e-9


def test_flow_rejects_bad_tangents(sphere):
    p = sphere.point([0.0, 0.0, 1.0])
    with pytest.raises(InputError):
        geodesic_flow(sphere, p, np.array([0.0, 0.0, 1.0]), 0.1)   # not tangent
    with pytest.raises(InputError):
        geodesic_flow(sphere, p, np.array([2.0, 0.0, 0.0]), 0.1)   # not unit


def test_connect_quarter_great_circle(sphere):
    seg = connect(sphere, sphere.point([0, 0, 1.0]), sphere.point([1.0, 0, 0]))
    assert abs(seg.length - math.pi / 2) <= 1e-9


def test_connect_flat_torus_straight(flat_torus):
    seg = connect(flat_torus, flat_torus.point([0.1, 0.2]), flat_torus.point([0.3, 0.2]))
    assert abs(seg.length - 0.2) <= 1e-14
    assert np.allclose(seg.initial_velocity, [1.0, 0.0])


def test_connect_matches_polyline_energy_oracle(ellipsoid):
    # two points at arclength ~0.4 along the z=0 principal ellipse; oracle:
    # minimize the discrete energy of a projected polyline with fixed
    # endpoints and Richardson-extrapolate its chordal length
    from scipy.integrate import quad
    from scipy.optimize import minimize as scipy_minimize

    a, b = 1.0, 1.05
    speed = lambda t: math.sqrt(a**2 * math.sin(t) ** 2 + b**2 * math.cos(t) ** 2)
    # find the parameter with arclength exactly 0.4
    from scipy.optimize import brentq
    arc = lambda t: quad(speed, 0.0, t, limit=200)[0]
    t1 = brentq(lambda t: arc(t) - 0.4, 0.1, 1.0, xtol=1e-14)
    p = ellipsoid.point([a, 0.0, 0.0])
    q = ellipsoid.point(ellipsoid._geom.project_point(
        np.array([a * math.cos(t1), b * math.sin(t1), 0.0])))

    seg = connect(ellipsoid, p, q)

    def polyline_len(n_pts):
        t0 = np.linspace(0.0, t1, n_pts)
        X0 = np.stack([a * np.cos(t0), b * np.sin(t0), 0.0 * t0], axis=1)
        X0 = ellipsoid._geom.project_point(X0)

        def energy(flat):
            X = ellipsoid._geom.project_point(flat.reshape(-1, 3))
            full = np.vstack([p.coords, X, q.coords])
            d = np.diff(full, axis=0)
            return float(np.sum(d * d))

        res = scipy_minimize(energy, X0[1:-1].reshape(-1), method="L-BFGS-B",
                             options={"ftol": 1e-16, "gtol": 1e-12, "maxiter": 2000})
        X = ellipsoid._geom.project_point(res.x.reshape(-1, 3))
        full = np.vstack([p.coords, X, q.coords])
        return float(np.sum(np.linalg.norm(np.diff(full, axis=0), axis=1)))

    L1, L2 = polyline_len(101), polyline_len(201)
    oracle = (4.0 * L2 - L1) / 3.0          # removes the O(h^2) chord bias
    assert abs(seg.length - 0.4) <= 1e-8
    assert abs(seg.length - oracle) <= 1e-8


def test_connect_rejects_far_endpoints(sphere):
    with pytest.raises(DomainError):
        connect(sphere, sphere.point([0, 0, 1.0]), sphere.point([0, 0, -1.0]))


def test_transport_flat_torus_is_identity(flat_torus):
    seg = connect(flat_torus, flat_torus.point([0.1, 0.2]), flat_torus.point([0.3, 0.3]))
    w = parallel_transport(flat_torus, seg, np.array([0.0, 1.0]))
    assert np.allclose(w, [0.0, 1.0], atol=1e-12)


def test_transport_zero_vector(sphere):
    seg = connect(sphere, sphere.point([0, 0, 1.0]), sphere.point([1.0, 0, 0]))
    assert np.allclose(parallel_transport(sphere, seg, np.zeros(3)), 0.0)


def test_transport_rejects_non_tangent(sphere):
    seg = connect(sphere, sphere.point([0, 0, 1.0]), sphere.point([1.0, 0, 0]))
    with pytest.raises(InputError):
        parallel_transport(sphere, seg, np.array([0.0, 0.0, 1.0]))


def test_latitude_holonomy_matches_cap_angle(sphere):
    # transporting a frame around a latitude loop rotates it by the enclosed
    # curvature 2*pi*(1 - cos(colat)); polygon holonomies at N and 2N are
    # Richardson-extrapolated to kill the O(1/N^2) polygon bias
    colat = math.pi / 4

    def holonomy(N):
        t = 2.0 * math.pi * np.arange(N) / N
        X = np.stack([math.sin(colat) * np.cos(t), math.sin(colat) * np.sin(t),
                      math.cos(colat) + 0.0 * t], axis=1)
        X = sphere._geom.project_point(X)
        batch = connect_many(sphere, X, np.roll(X, -1, axis=0))
        w = sphere.project_tangent(X[:1], np.array([[0.0, 0.0, 1.0]]))[0]
        w /= np.linalg.norm(w)
        w0 = w.copy()
        from geodlab.manifold import transport_many
        W = w[None, None, :]
        for i in range(N):
            W = transport_many(sphere, batch.X0[i][None], batch.v0[i][None],
                               np.array([batch.lengths[i]]), W)
        cosang = float(np.clip(np.dot(W[0, 0], w0), -1.0, 1.0))
        return math.acos(cosang)

    h1, h2 = holonomy(256), holonomy(512)
    angle = (4.0 * h2 - h1) / 3.0
    expected = 2.0 * math.pi * (1.0 - math.cos(colat))
    assert abs(angle - expected) <= 1e-6


def test_roundtrip_flow_connect(all_manifolds):
    rng = np.random.default_rng(3)
    for name, m in all_manifolds.items():
        for _ in range(5):
            X = surface_point(m, rng)
            p = m.point(X)
            v = random_unit_tangent(m, X, rng)
            t = float(rng.uniform(0.2, 0.95)) * m.delta
            q, _ = geodesic_flow(m, p, v, t)
            seg = connect(m, p, q)
            assert abs(seg.length - t) <= 1e-7, name
            assert float(m.norm(X, seg.initial_velocity - v)) <= 1e-7, name


def test_distance_symmetry(all_manifolds):
    rng = np.random.default_rng(5)
    for name, m in all_manifolds.items():
        for _ in range(5):
            X = surface_point(m, rng)
            p = m.point(X)
            v = random_unit_tangent(m, X, rng)
            q, _ = geodesic_flow(m, p, v, 0.6 * m.delta)
            assert abs(distance(m, p, q) - distance(m, q, p)) <= 1e-10, name


def test_segment_samples_satisfy_constraint(sphere, ellipsoid):
    for m in (sphere, ellipsoid):
        seg = connect(m, m.point(m._geom.project_point(np.array([1.0, 0.1, 0.1]))),
                      m.point(m._geom.project_point(np.array([0.8, 0.5, 0.2]))))
        res = np.abs(m._geom.constraint(seg.samples))
        assert float(np.max(res)) <= 1e-10


def test_segment_lands_on_end(all_manifolds):
    rng = np.random.default_rng(11)
    for name, m in all_manifolds.items():
        X = surface_point(m, rng)
        p = m.point(X)
        v = random_unit_tangent(m, X, rng)
        q, _ = geodesic_flow(m, p, v, 0.7 * m.delta)
        seg = connect(m, p, q)
        end, _ = geodesic_flow(m, seg.start, seg.initial_velocity, seg.length)
        diff = end.coords - seg.end.coords
        if not m.embedded:
            per = m.periods
            diff = (diff + per / 2) % per - per / 2
        assert float(np.linalg.norm(diff)) <= 1e-8, name
        assert abs(float(np.linalg.norm(seg.initial_velocity)
                         if m.embedded else m.norm(X, seg.initial_velocity)) - 1.0) <= 1e-10


def test_transport_isometry(all_manifolds):
    rng = np.random.default_rng(13)
    for name, m in all_manifolds.items():
        X = surface_point(m, rng)
        p = m.point(X)
        v = random_unit_tangent(m, X, rng)
        q, _ = geodesic_flow(m, p, v, 0.5 * m.delta)
        seg = connect(m, p, q)
        w = m.project_tangent(X, rng.standard_normal(m.ambient_dim))
        out = parallel_transport(m, seg, w)
        assert abs(m.norm(seg.end.coords, out) - m.norm(X, w)) <= 1e-8, name


def test_manifold_validation():
    with pytest.raises(InputError):
        make_manifold("klein_bottle", [1.0])
    with pytest.raises(InputError):
        make_manifold("ellipsoid", [1.0, -1.0, 1.0])
    with pytest.raises(InputError):
        make_manifold("torus_of_revolution", [1.0, 2.0])    # needs R > r
    with pytest.raises(InputError):
        make_manifold("round_sphere", [1.0], delta=4.0)      # beyond injectivity
    m = make_manifold("flat_torus", [2.0, 3.0])
    assert m.delta == 0.5 and m.dim == 2


def test_point_validation(sphere, flat_torus):
    with pytest.raises(InputError):
        sphere.point([1.0, 1.0, 1.0])
    p = sphere.point([1.0, 1.0, 1.0], project=True)
    assert abs(np.linalg.norm(p.coords) - 1.0) <= 1e-12
    q = flat_torus.point([1.25, -0.5])
    assert np.allclose(q.coords, [0.25, 0.5])


def test_connect_exactly_delta_accepted(sphere):
    # endpoints at exactly delta = pi/2 must be accepted
    seg = connect(sphere, sphere.point([0, 0, 1.0]), sphere.point([1.0, 0, 0]))
    assert seg.length <= sphere.delta * (1 + 1e-7)
