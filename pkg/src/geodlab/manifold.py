"""Model Riemannian manifolds: geodesic flow, shortest connections, parallel transport.

Two numerical backends cover the built-in manifolds:

* ``embedded_level_set`` (round sphere, ellipsoid): the surface is the zero set
  of G(x) = sum_i x_i^2 / a_i^2 - 1 in ambient Euclidean space.  Geodesics are
  integrated as ambient curves whose acceleration stays normal to the surface,
  ``x'' = -(x'^T H_G x' / |grad G|^2) grad G``, with the position re-projected
  onto the constraint after every step.
* ``periodic_chart`` (flat torus, torus of revolution): periodic coordinates
  with an analytic diagonal metric; geodesics follow the Christoffel ODE
  ``x''^k + Gamma^k_ij x'^i x'^j = 0``.

All flows use fixed-step classical RK4 with 64 steps per segment of length at
most ``delta``, so every output is deterministic.  The batched entry points
carry a leading axis over independent segments; the scalar API wraps them.
Chart coordinates are integrated unwrapped and canonicalized into the
fundamental domain [0, period) only at API boundaries, which keeps winding
displacements available to the loop-space layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InputError, NumericError

KINDS = ("round_sphere", "ellipsoid", "flat_torus", "torus_of_revolution")
BACKENDS = ("embedded_level_set", "periodic_chart")

STEPS_PER_SEGMENT = 64
_STEPS_PER_DELTA = 1024   # refinement for segments comparable to delta
CONSTRAINT_TOL = 1e-10
_CONNECT_TOL = 3e-13
_CONNECT_HARD_TOL = 1e-10
_CONNECT_MAX_ITERS = 50
DEFAULT_SAMPLE_COUNT = 9


# ---------------------------------------------------------------------------
# backend geometries (batched: X has shape (..., m))


class _LevelSet:
    """Hypersurface sum x_i^2/a_i^2 = 1 with the ambient Euclidean metric."""

    embedded = True

    def __init__(self, axes: np.ndarray):
        self.axes = np.asarray(axes, dtype=float)
        self.inv2 = 1.0 / self.axes**2
        self.ambient_dim = self.axes.size

    def constraint(self, X):
        return np.sum(X * X * self.inv2, axis=-1) - 1.0

    def constraint_grad(self, X):
        return 2.0 * X * self.inv2

    def acc(self, X, V):
        g = self.constraint_grad(X)
        num = 2.0 * np.sum(V * V * self.inv2, axis=-1)
        den = np.sum(g * g, axis=-1)
        return -(num / den)[..., None] * g

    def transport_rhs(self, X, V, W):
        g = self.constraint_grad(X)
        num = 2.0 * np.sum(W * V * self.inv2, axis=-1)
        den = np.sum(g * g, axis=-1)
        return -(num / den)[..., None] * g

    def project_point(self, X):
        X = np.array(X, dtype=float, copy=True)
        for _ in range(60):
            r = self.constraint(X)
            if float(np.max(np.abs(r))) <= 1e-14:
                break
            g = self.constraint_grad(X)
            X -= (r / np.sum(g * g, axis=-1))[..., None] * g
        return X

    def project_tangent(self, X, V):
        g = self.constraint_grad(X)
        n = g / np.linalg.norm(g, axis=-1, keepdims=True)
        return V - np.sum(V * n, axis=-1, keepdims=True) * n

    def dot(self, X, U, V):
        return np.sum(U * V, axis=-1)

    def tangent_basis(self, X):
        # columns of the Householder reflector sending e_m to the unit normal
        g = self.constraint_grad(X)
        n = g / np.linalg.norm(g, axis=-1, keepdims=True)
        m = self.ambient_dim
        em = np.zeros(m)
        em[-1] = 1.0
        u = n - em
        unorm = np.linalg.norm(u, axis=-1, keepdims=True)
        safe = unorm[..., 0] > 1e-12
        u = np.where(safe[..., None], u / np.where(unorm == 0, 1.0, unorm), 0.0)
        H = np.broadcast_to(np.eye(m), X.shape + (m,)).copy()
        H -= 2.0 * u[..., :, None] * u[..., None, :]
        # basis rows = first m-1 reflector columns; all orthogonal to n
        return np.swapaxes(H[..., :, : m - 1], -1, -2)

    def gauss_curvature(self, X):
        if self.ambient_dim != 3:
            raise InputError("closed-form Gauss curvature needs a 2-dimensional surface")
        a2 = self.axes**2
        h2 = np.sum(X * X / a2**2, axis=-1)
        return 1.0 / (np.prod(a2) * h2**2)

    def curvature_is_constant(self):
        return bool(np.all(self.axes == self.axes[0]))


class _FlatTorus:
    """R^d modulo the lattice of side lengths, Euclidean metric."""

    embedded = False

    def __init__(self, sides: np.ndarray):
        self.periods = np.asarray(sides, dtype=float)
        self.ambient_dim = self.periods.size

    def metric_diag(self, X):
        return np.ones(X.shape)

    def acc(self, X, V):
        return np.zeros_like(V)

    def transport_rhs(self, X, V, W):
        return np.zeros_like(W)

    def dot(self, X, U, V):
        return np.sum(U * V, axis=-1)

    def tangent_basis(self, X):
        d = self.ambient_dim
        return np.broadcast_to(np.eye(d), X.shape + (d,)).copy()

    def gauss_curvature(self, X):
        return np.zeros(X.shape[:-1])

    def curvature_is_constant(self):
        return True


class _RevolutionTorus:
    """Torus of revolution in chart (u, v), metric diag((R + r cos v)^2, r^2)."""

    embedded = False

    def __init__(self, R: float, r: float):
        self.R = float(R)
        self.r = float(r)
        self.periods = np.array([2.0 * math.pi, 2.0 * math.pi])
        self.ambient_dim = 2

    def _f(self, v):
        return self.R + self.r * np.cos(v)

    def metric_diag(self, X):
        out = np.empty(X.shape)
        out[..., 0] = self._f(X[..., 1]) ** 2
        out[..., 1] = self.r**2
        return out

    def acc(self, X, V):
        v = X[..., 1]
        f = self._f(v)
        du, dv = V[..., 0], V[..., 1]
        out = np.empty_like(V)
        out[..., 0] = 2.0 * self.r * np.sin(v) / f * du * dv
        out[..., 1] = -f * np.sin(v) / self.r * du * du
        return out

    def transport_rhs(self, X, V, W):
        v = X[..., 1]
        f = self._f(v)
        gam_uuv = -self.r * np.sin(v) / f          # Gamma^u_{uv}
        gam_vuu = f * np.sin(v) / self.r           # Gamma^v_{uu}
        out = np.empty_like(W)
        out[..., 0] = -gam_uuv * (V[..., 0] * W[..., 1] + V[..., 1] * W[..., 0])
        out[..., 1] = -gam_vuu * V[..., 0] * W[..., 0]
        return out

    def dot(self, X, U, V):
        g = self.metric_diag(X)
        return np.sum(g * U * V, axis=-1)

    def tangent_basis(self, X):
        g = self.metric_diag(X)
        basis = np.zeros(X.shape[:-1] + (2, 2))
        basis[..., 0, 0] = 1.0 / np.sqrt(g[..., 0])
        basis[..., 1, 1] = 1.0 / np.sqrt(g[..., 1])
        return basis

    def gauss_curvature(self, X):
        v = X[..., 1]
        return np.cos(v) / (self.r * self._f(v))

    def curvature_is_constant(self):
        return False


# ---------------------------------------------------------------------------
# handle and point types


@dataclass(frozen=True, eq=False)
class PointRep:
    """A manifold point: ambient coordinates (embedded) or chart coordinates."""

    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float))


@dataclass(frozen=True, eq=False)
class ManifoldHandle:
    kind: str
    params: tuple
    dim: int
    delta: float
    backend: str
    _geom: object = field(repr=False)

    @property
    def ambient_dim(self) -> int:
        return self._geom.ambient_dim

    @property
    def embedded(self) -> bool:
        return self._geom.embedded

    @property
    def periods(self) -> np.ndarray:
        return self._geom.periods

    # -- point handling ---------------------------------------------------

    def point(self, coords, project: bool = False) -> PointRep:
        X = np.asarray(coords, dtype=float)
        if X.shape != (self.ambient_dim,):
            raise InputError(
                f"expected {self.ambient_dim} coordinates, got shape {X.shape}"
            )
        if self.embedded:
            if project:
                X = self._geom.project_point(X)
            res = abs(float(self._geom.constraint(X)))
            if res > CONSTRAINT_TOL:
                raise InputError(
                    f"point violates the level-set constraint (residual {res:.3e})"
                )
        else:
            X = np.mod(X, self.periods)
        return PointRep(X)

    def wrap(self, X):
        if self.embedded:
            return X
        return np.mod(X, self.periods)

    def project_point(self, X):
        return self._geom.project_point(X) if self.embedded else X

    def project_tangent(self, X, V):
        return self._geom.project_tangent(X, V) if self.embedded else V

    def dot(self, X, U, V):
        return self._geom.dot(X, U, V)

    def norm(self, X, V):
        return np.sqrt(np.maximum(self._geom.dot(X, V, V), 0.0))

    def unit(self, X, V):
        n = self.norm(X, V)
        return V / np.where(n == 0.0, 1.0, n)[..., None]

    def tangent_basis(self, X):
        return self._geom.tangent_basis(X)

    def gauss_curvature(self, X):
        return self._geom.gauss_curvature(X)

    def check_tangent(self, p: PointRep, v, unit: bool = True):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.ambient_dim,):
            raise InputError(f"tangent vector must have {self.ambient_dim} components")
        if self.embedded:
            g = self._geom.constraint_grad(p.coords)
            n = g / np.linalg.norm(g)
            if abs(float(np.dot(v, n))) > 1e-8 * max(1.0, float(np.linalg.norm(v))):
                raise InputError("vector is not tangent to the surface at p")
        if unit:
            nv = float(self.norm(p.coords, v))
            if abs(nv - 1.0) > 1e-8:
                raise InputError(f"tangent vector must be unit speed (|v| = {nv:.3e})")

    def minimal_lift(self, base, X):
        """Lift of chart point X nearest to ``base``; ties take the smaller
        (lexicographically) displacement."""
        per = self.periods
        b = np.mod(X - base, per)
        half = per / 2.0
        disp = np.where(b < half, b, np.where(b > half, b - per, -half))
        return base + disp


def _injectivity_radius(kind: str, geom, params) -> float:
    if kind == "round_sphere":
        return math.pi * params[0]
    if kind == "flat_torus":
        return min(params) / 2.0
    if kind == "ellipsoid":
        axes = sorted(params)
        if len(axes) == 3:
            # Klingenberg: inj >= min(pi/sqrt(Kmax), shortest closed geodesic/2)
            return math.pi * axes[0] * axes[1] / axes[2]
        return (math.pi / 2.0) * axes[0]
    # torus of revolution: sampled curvature maximum plus the two equator/
    # meridian circle lengths, cached on the handle at construction
    R, r = params
    v = np.linspace(0.0, 2.0 * math.pi, 4097)
    K = np.cos(v) / (r * (R + r * np.cos(v)))
    kmax = float(np.max(K))
    return min(math.pi / math.sqrt(kmax), math.pi * r, math.pi * (R - r))


def make_manifold(
    kind: str,
    params: Sequence[float],
    dim: int | None = None,
    delta: float | None = None,
) -> ManifoldHandle:
    """Build a validated manifold handle with a safe default ``delta``."""
    params = tuple(float(p) for p in params)
    if kind not in KINDS:
        raise InputError(f"unknown manifold kind {kind!r}; choose one of {KINDS}")
    if any(p <= 0 for p in params):
        raise InputError("manifold parameters must be strictly positive")

    if kind == "round_sphere":
        if len(params) != 1:
            raise InputError("round_sphere takes a single radius parameter")
        d = 2 if dim is None else int(dim)
        if d < 2:
            raise InputError("round_sphere needs dim >= 2")
        geom = _LevelSet(np.full(d + 1, params[0]))
        default_delta = params[0] * math.pi / 2.0
        backend = "embedded_level_set"
    elif kind == "ellipsoid":
        if len(params) < 3:
            raise InputError("ellipsoid needs at least 3 semi-axes")
        d = len(params) - 1
        if dim is not None and int(dim) != d:
            raise InputError("ellipsoid dim must equal len(params) - 1")
        geom = _LevelSet(np.asarray(params))
        default_delta = 0.5 * min(params) * math.pi / 2.0
        backend = "embedded_level_set"
    elif kind == "flat_torus":
        if len(params) < 2:
            raise InputError("flat_torus needs at least 2 side lengths")
        d = len(params)
        if dim is not None and int(dim) != d:
            raise InputError("flat_torus dim must equal len(params)")
        geom = _FlatTorus(np.asarray(params))
        default_delta = min(params) / 4.0
        backend = "periodic_chart"
    else:
        if len(params) != 2:
            raise InputError("torus_of_revolution takes (R, r)")
        R, r = params
        if not R > r:
            raise InputError("torus_of_revolution requires R > r > 0")
        d = 2
        if dim is not None and int(dim) != 2:
            raise InputError("torus_of_revolution is 2-dimensional")
        geom = _RevolutionTorus(R, r)
        default_delta = 0.5 * r * math.pi
        backend = "periodic_chart"

    inj = _injectivity_radius(kind, geom, params)
    if delta is None:
        delta = min(default_delta, inj)
    delta = float(delta)
    if not 0.0 < delta <= inj + 1e-12:
        raise InputError(
            f"delta = {delta} must lie in (0, injectivity radius = {inj:.6g}]"
        )
    return ManifoldHandle(kind=kind, params=params, dim=d, delta=delta,
                          backend=backend, _geom=geom)


# ---------------------------------------------------------------------------
# RK4 flow


def steps_for(m: ManifoldHandle, lengths) -> int:
    """Deterministic RK4 step count for segments of the given lengths.

    At least 64 steps per segment; segments approaching delta are refined so
    the integrator bias stays below ~1e-13 per segment (needed for the exact
    length-preservation contracts of subdivision and reversal).
    """
    L = float(np.max(np.asarray(lengths, dtype=float), initial=0.0))
    n = max(float(STEPS_PER_SEGMENT), _STEPS_PER_DELTA * L / m.delta)
    return 8 * math.ceil(n / 8.0)


def _integrate(m: ManifoldHandle, X, V, T, n_steps: int, n_record: int = 0):
    """RK4 integration of the geodesic ODE for a batch of initial conditions.

    X, V: (..., m) positions and unit velocities; T: (...,) arclengths.
    Chart positions evolve unwrapped.  When n_record > 0 (must divide
    n_steps), returns recorded positions of shape (n_record + 1, ..., m).
    """
    geom = m._geom
    X = np.array(X, dtype=float, copy=True)
    V = np.array(V, dtype=float, copy=True)
    T = np.broadcast_to(np.asarray(T, dtype=float), X.shape[:-1])
    if isinstance(geom, _FlatTorus):
        # straight lines: RK4 is exact here, so skip the stepping entirely
        XT = X + T[..., None] * V
        if n_record:
            fr = np.linspace(0.0, 1.0, n_record + 1)
            rec = X[None] + (fr[:, None] * T.reshape(-1)[None, :]).reshape(
                (n_record + 1,) + T.shape)[..., None] * V[None]
            return XT, V, rec
        return XT, V
    h = (T / n_steps)[..., None]
    rec = None
    every = 0
    if n_record:
        if n_steps % n_record:
            raise InputError("n_record must divide n_steps")
        every = n_steps // n_record
        rec = np.empty((n_record + 1,) + X.shape)
        rec[0] = X
    acc = geom.acc
    for step in range(n_steps):
        a1 = acc(X, V)
        X2 = X + 0.5 * h * V
        V2 = V + 0.5 * h * a1
        a2 = acc(X2, V2)
        X3 = X + 0.5 * h * V2
        V3 = V + 0.5 * h * a2
        a3 = acc(X3, V3)
        X4 = X + h * V3
        V4 = V + h * a3
        a4 = acc(X4, V4)
        X = X + h * (V + 2.0 * V2 + 2.0 * V3 + V4) / 6.0
        V = V + h * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0
        if geom.embedded:
            X = geom.project_point(X)
            V = geom.project_tangent(X, V)
        nv = m.norm(X, V)
        V = V / np.where(nv == 0.0, 1.0, nv)[..., None]
        if rec is not None and (step + 1) % every == 0:
            rec[(step + 1) // every] = X
    if rec is not None:
        return X, V, rec
    return X, V


def geodesic_flow(m: ManifoldHandle, p: PointRep, v, t: float,
                  n_steps: int | None = None):
    """Unit-speed geodesic position and velocity after arclength t >= 0.

    The optional n_steps overrides the default fixed-step resolution (64 RK4
    steps per length delta); tests use it for step-halving convergence checks.
    """
    if t < 0:
        raise InputError("flow time must be nonnegative")
    m.check_tangent(p, v, unit=True)
    if n_steps is None:
        n_steps = steps_for(m, t)
    if t == 0.0:
        return m.point(p.coords.copy()), np.asarray(v, dtype=float).copy()
    X, V = _integrate(m, p.coords[None, :], np.asarray(v, float)[None, :],
                      np.array([t]), n_steps)
    if not np.all(np.isfinite(X)):
        raise NumericError("geodesic integration produced non-finite values")
    return m.point(m.wrap(X[0])), V[0]


# ---------------------------------------------------------------------------
# shortest connection (batched shooting)


@dataclass(eq=False)
class BatchSegments:
    """Arrays describing one geodesic segment per batch row."""

    X0: np.ndarray          # (B, m) start coordinates
    X1: np.ndarray          # (B, m) end coordinates (canonical/wrapped)
    v0: np.ndarray          # (B, m) unit initial velocities
    v1: np.ndarray          # (B, m) unit final velocities
    lengths: np.ndarray     # (B,)
    samples: np.ndarray     # (B, S, m) points along each segment (wrapped)
    disp: np.ndarray | None  # (B, m) unwrapped chart displacement, else None

    def __len__(self):
        return self.X0.shape[0]


def connect_many(m: ManifoldHandle, X0, X1,
                 sample_count: int = DEFAULT_SAMPLE_COUNT) -> BatchSegments:
    """Solve the two-point problem for every row: the unique geodesic of
    length <= delta from X0[b] to X1[b], by Gauss-Newton shooting on the
    initial-velocity coordinates."""
    geom = m._geom
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    B, md = X0.shape
    d = m.dim

    if m.embedded:
        basis = m.tangent_basis(X0)                    # (B, d, m)
        chord = X1 - X0
        chord_len = np.linalg.norm(chord, axis=-1)
        c = np.einsum("bdm,bm->bd", basis, chord)      # seed coefficients
        target = X1
    else:
        basis = None
        lift = m.minimal_lift(X0, X1)
        c = lift - X0
        chord_len = m.norm(X0, c)
        target = lift

    def w_of(cc):
        if m.embedded:
            return np.einsum("bdm,bd->bm", basis, cc)
        return cc

    if np.any(chord_len < 1e-12):
        raise InputError("coincident endpoints: zero-length segments are not representable")
    # the raw chord is a lower bound for the distance on the embedded
    # backends and exact on the flat torus, so a clearly over-delta pair can
    # be rejected before any integration
    early_cap = m.delta * (1.5 if m.kind == "torus_of_revolution" else 1.0 + 1e-9)
    if np.any(chord_len > early_cap):
        raise DomainError("endpoints are farther apart than delta")
    seed_len = m.norm(X0, w_of(c))
    if np.any(seed_len < 1e-12):
        raise DomainError("endpoints are conjugate-like: the chord has no "
                          "tangential component (farther than delta)")

    fd = 1e-5 * m.delta
    n_steps_gn = steps_for(m, seed_len)

    def endpoints(cc):
        W = w_of(cc)
        t = m.norm(X0, W)
        U = W / t[..., None]
        E, VE = _integrate(m, X0, U, t, n_steps_gn)
        return E, VE, t

    converged = False
    for _ in range(_CONNECT_MAX_ITERS):
        E, VE, t = endpoints(c)
        F = E - target
        res = np.linalg.norm(F, axis=-1)
        tol = _CONNECT_TOL * (1.0 + t)
        if np.all(res <= tol):
            converged = True
            break
        # central-difference Jacobian in the d shooting coefficients
        stacked = np.concatenate(
            [c + fd * np.eye(d)[j] for j in range(d)]
            + [c - fd * np.eye(d)[j] for j in range(d)],
            axis=0,
        )
        Xrep = np.tile(X0, (2 * d, 1))
        Wb = (np.einsum("bdm,bd->bm", np.tile(basis, (2 * d, 1, 1)), stacked)
              if m.embedded else stacked)
        tb = m.norm(Xrep, Wb)
        Eb, _ = _integrate(m, Xrep, Wb / tb[..., None], tb, n_steps_gn)
        J = np.empty((B, md, d))
        for j in range(d):
            J[:, :, j] = (Eb[j * B:(j + 1) * B] - Eb[(d + j) * B:(d + j + 1) * B]) / (2 * fd)
        JtJ = np.einsum("bmi,bmj->bij", J, J)
        JtF = np.einsum("bmi,bm->bi", J, F)
        JtJ += 1e-14 * np.eye(d)
        step = -np.linalg.solve(JtJ, JtF[..., None])[..., 0]
        cap = 0.25 * m.delta
        sn = np.linalg.norm(step, axis=-1)
        step *= np.where(sn > cap, cap / np.where(sn == 0, 1.0, sn), 1.0)[:, None]
        c = c + step

    E, VE, t = endpoints(c)
    res = np.linalg.norm(E - target, axis=-1)
    if not converged and np.any(res > _CONNECT_HARD_TOL * (1.0 + t)):
        worst = int(np.argmax(res))
        raise NumericError(
            f"shooting failed to converge within {_CONNECT_MAX_ITERS} iterations "
            f"(worst residual {res[worst]:.3e} on row {worst})"
        )
    # inputs at exactly delta are accepted; the relative margin covers the
    # fixed-step integrator's self-bias on a full-delta segment
    if np.any(t > m.delta * (1.0 + 1e-7)):
        raise DomainError("endpoints are farther apart than delta")

    W = w_of(c)
    v0 = W / t[..., None]
    n_rec = sample_count - 1
    n_steps = n_steps_gn
    if n_steps % n_rec:
        n_steps = n_rec * math.ceil(n_steps / n_rec)
    _, _, rec = _integrate(m, X0, v0, t, n_steps, n_record=n_rec)
    samples = np.swapaxes(rec, 0, 1)                 # (B, S, m)
    samples = m.wrap(samples)
    samples[:, 0, :] = m.wrap(X0)
    samples[:, -1, :] = m.wrap(X1)
    disp = None if m.embedded else (E - X0)
    return BatchSegments(X0=X0.copy(), X1=m.wrap(X1).copy(), v0=v0, v1=VE,
                         lengths=t, samples=samples, disp=disp)


@dataclass(frozen=True, eq=False)
class GeodesicSegment:
    """The unique shortest geodesic between two points at distance <= delta."""

    manifold: ManifoldHandle
    start: PointRep
    end: PointRep
    initial_velocity: np.ndarray
    final_velocity: np.ndarray
    length: float
    sample_count: int
    samples: np.ndarray
    disp: np.ndarray | None = None  # unwrapped chart displacement


def _segment_from_batch(m: ManifoldHandle, batch: BatchSegments, i: int) -> GeodesicSegment:
    return GeodesicSegment(
        manifold=m,
        start=PointRep(batch.X0[i].copy()),
        end=PointRep(batch.X1[i].copy()),
        initial_velocity=batch.v0[i].copy(),
        final_velocity=batch.v1[i].copy(),
        length=float(batch.lengths[i]),
        sample_count=batch.samples.shape[1],
        samples=batch.samples[i].copy(),
        disp=None if batch.disp is None else batch.disp[i].copy(),
    )


def connect(m: ManifoldHandle, p: PointRep, q: PointRep,
            sample_count: int = DEFAULT_SAMPLE_COUNT) -> GeodesicSegment:
    """Unique shortest geodesic segment between p and q (d(p, q) <= delta)."""
    batch = connect_many(m, p.coords[None, :], q.coords[None, :], sample_count)
    return _segment_from_batch(m, batch, 0)


def distance(m: ManifoldHandle, p: PointRep, q: PointRep) -> float:
    return connect(m, p, q).length


# ---------------------------------------------------------------------------
# parallel transport


def transport_many(m: ManifoldHandle, X0, v0, lengths, W,
                   n_steps: int | None = None):
    """Parallel-transport tangent vectors W (B, k, m) along the geodesics
    issued from (X0, v0) for the given arclengths.  Returns (B, k, m)."""
    geom = m._geom
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    B, md = X0.shape
    W = np.array(W, dtype=float, copy=True)
    if W.ndim == 2:
        W = W[:, None, :]
    k = W.shape[1]
    T = np.broadcast_to(np.asarray(lengths, dtype=float), (B,))
    if isinstance(geom, _FlatTorus):
        return W
    if n_steps is None:
        n_steps = steps_for(m, T)
    h = (T / n_steps)[:, None]

    X = X0.copy()
    V = np.array(v0, dtype=float, copy=True)

    def rhs(Xc, Vc, Wc):
        return np.stack([geom.transport_rhs(Xc, Vc, Wc[:, j]) for j in range(k)], axis=1)

    for _ in range(n_steps):
        a1 = geom.acc(X, V)
        b1 = rhs(X, V, W)
        X2, V2, W2 = X + 0.5 * h * V, V + 0.5 * h * a1, W + 0.5 * h[:, None] * b1
        a2 = geom.acc(X2, V2)
        b2 = rhs(X2, V2, W2)
        X3, V3, W3 = X + 0.5 * h * V2, V + 0.5 * h * a2, W + 0.5 * h[:, None] * b2
        a3 = geom.acc(X3, V3)
        b3 = rhs(X3, V3, W3)
        X4, V4, W4 = X + h * V3, V + h * a3, W + h[:, None] * b3
        a4 = geom.acc(X4, V4)
        b4 = rhs(X4, V4, W4)
        X = X + h * (V + 2 * V2 + 2 * V3 + V4) / 6.0
        V = V + h * (a1 + 2 * a2 + 2 * a3 + a4) / 6.0
        W = W + h[:, None] * (b1 + 2 * b2 + 2 * b3 + b4) / 6.0
        if geom.embedded:
            X = geom.project_point(X)
            V = geom.project_tangent(X, V)
            W = np.stack([geom.project_tangent(X, W[:, j]) for j in range(k)], axis=1)
        nv = m.norm(X, V)
        V = V / np.where(nv == 0.0, 1.0, nv)[:, None]
    return W


def parallel_transport(m: ManifoldHandle, seg: GeodesicSegment, w) -> np.ndarray:
    """Parallel transport of tangent vector w from seg.start to seg.end."""
    w = np.asarray(w, dtype=float)
    if w.shape != (m.ambient_dim,):
        raise InputError(f"tangent vector must have {m.ambient_dim} components")
    if np.allclose(w, 0.0):
        return np.zeros_like(w)
    if m.embedded:
        g = m._geom.constraint_grad(seg.start.coords)
        n = g / np.linalg.norm(g)
        if abs(float(np.dot(w, n))) > 1e-8 * max(1.0, float(np.linalg.norm(w))):
            raise InputError("vector is not tangent to the surface at seg.start")
    out = transport_many(m, seg.start.coords[None, :], seg.initial_velocity[None, :],
                         np.array([seg.length]), w[None, None, :])
    return out[0, 0]
