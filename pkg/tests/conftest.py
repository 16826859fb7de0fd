"""Shared fixtures: manifolds, reference geodesics, random polygon factory.

Expensive objects (sweep-outs, reference geodesics) are session-scoped and
reused by the module tests and the acceptance suite.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

import geodlab.finder as fd
import geodlab.loopspace as ls
from geodlab.manifold import make_manifold


@pytest.fixture(scope="session")
def sphere():
    return make_manifold("round_sphere", [1.0])


@pytest.fixture(scope="session")
def ellipsoid():
    return make_manifold("ellipsoid", [1.0, 1.05, 1.1])


@pytest.fixture(scope="session")
def flat_torus():
    return make_manifold("flat_torus", [1.0, 1.0])


@pytest.fixture(scope="session")
def flat_torus_wide():
    # delta override so the straight (3,4) loop fits a 16-gon
    return make_manifold("flat_torus", [1.0, 1.0], delta=0.4)


@pytest.fixture(scope="session")
def revtorus():
    return make_manifold("torus_of_revolution", [2.0, 1.0])


def circle_samples(fn, count=512):
    t = np.linspace(0.0, 2.0 * math.pi, count, endpoint=False)
    return np.stack(fn(t), axis=1)


@pytest.fixture(scope="session")
def equator_polygon_64(sphere):
    pts = circle_samples(lambda t: (np.cos(t), np.sin(t), 0.0 * t))
    return ls.polygon_from_samples(sphere, pts, 64)


@pytest.fixture(scope="session")
def sphere_greatcircle(equator_polygon_64):
    return ls.closed_geodesic(equator_polygon_64)


def principal_section(ellipsoid, missing_axis, N=64):
    """Polygon inscribed in the principal section with the given axis zeroed."""
    others = [i for i in range(3) if i != missing_axis]
    axes = np.asarray(ellipsoid.params)
    t = np.linspace(0.0, 2.0 * math.pi, 512, endpoint=False)
    pts = np.zeros((t.size, 3))
    pts[:, others[0]] = axes[others[0]] * np.cos(t)
    pts[:, others[1]] = axes[others[1]] * np.sin(t)
    pts = ellipsoid._geom.project_point(pts)
    return ls.polygon_from_samples(ellipsoid, pts, N)


@pytest.fixture(scope="session")
def ellipsoid_ellipses(ellipsoid):
    """The three principal ellipses as converged geodesics, via seeded Newton.

    Index by the missing axis: 2 -> (1, 1.05) section, 1 -> (1, 1.1) middle,
    0 -> (1.05, 1.1) section.
    """
    out = {}
    for missing in (0, 1, 2):
        g = fd.refine_newton(principal_section(ellipsoid, missing))
        assert g.converged
        out[missing] = g
    return out


@pytest.fixture(scope="session")
def torus_class_geodesics(flat_torus):
    out = {}
    for klass, bound in [((1, 0), 1.3), ((2, 1), 3.0), ((3, 4), 6.5)]:
        N = fd.resolution_for_bound(bound, flat_torus.delta)
        seed = fd.class_seed_polygon(flat_torus, klass, N)
        rng = np.random.default_rng(7)
        X = seed.vertex_array + 0.015 * rng.standard_normal(seed.vertex_array.shape)
        g = fd.minimize_in_class(flat_torus, ls.polygon(flat_torus, flat_torus.wrap(X)))
        assert not isinstance(g, fd.Collapsed) and g.converged
        out[klass] = g
    return out


@pytest.fixture(scope="session")
def sphere_sweep(sphere):
    return fd.sweepout_minimax(sphere, fd.FinderOptions(N=64))


@pytest.fixture(scope="session")
def ellipsoid_sweep(ellipsoid):
    return fd.sweepout_minimax(ellipsoid, fd.FinderOptions(N=64))


def surface_point(m, rng):
    """A uniform-ish random point: exact radial scaling onto the level set,
    or uniform chart coordinates."""
    if m.embedded:
        u = rng.standard_normal(m.ambient_dim)
        u /= np.linalg.norm(u)
        lam = 1.0 / math.sqrt(float(np.sum(u * u * m._geom.inv2)))
        return lam * u
    return rng.uniform(0, 1, m.dim) * m.periods


def random_unit_tangent(m, X, rng):
    v = m.project_tangent(X, rng.standard_normal(m.ambient_dim))
    return v / m.norm(X, v)


def random_polygon(m, N, rng, amp=0.03):
    """A valid random N-gon: a round base loop sized so every edge stays well
    inside delta, plus tangent noise."""
    t = 2.0 * math.pi * np.arange(N) / N
    if m.embedded:
        axes = np.asarray(m.params if m.kind == "ellipsoid" else [m.params[0]] * 3)
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        # spherical-cap circle of angular radius rho around the axis q[:, 2]
        rho = min(1.2, 0.4 * N * m.delta / (2.0 * math.pi * float(np.max(axes))))
        X = (math.cos(rho) * q[:, 2][None, :]
             + math.sin(rho) * (np.cos(t)[:, None] * q[:, 0] + np.sin(t)[:, None] * q[:, 1]))
        X = m._geom.project_point(X * float(np.min(axes)))
        amp_eff = amp * math.sin(rho)
    else:
        per = m.periods
        fmax = 1.0 if m.kind == "flat_torus" else sum(m.params)
        center = rng.uniform(0, 1, size=2) * per
        radius = min(0.2 * float(np.min(per)), 0.3 * N * m.delta / (2.0 * math.pi * fmax))
        X = center[None, :] + radius * np.stack([np.cos(t), np.sin(t)], axis=1)
        amp_eff = amp * radius * 10.0
    noise = amp_eff * rng.standard_normal(X.shape)
    X = m.wrap(m.project_point(X + m.project_tangent(X, noise)))
    return ls.polygon(m, X)


@pytest.fixture(scope="session")
def all_manifolds(sphere, ellipsoid, flat_torus, revtorus):
    return {"round_sphere": sphere, "ellipsoid": ellipsoid,
            "flat_torus": flat_torus, "torus_of_revolution": revtorus}
