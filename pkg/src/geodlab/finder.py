"""Locating closed geodesics.

Three procedures, all deterministic for fixed options:

* ``minimize_in_class``: iterate the midpoint shortening map inside a free
  homotopy class until the per-step decrease stalls, then polish with Newton.
  Null-homotopic seeds on simply connected manifolds may legitimately shrink
  to a point; that outcome is reported as a ``Collapsed`` verdict, not an
  error.

* ``sweepout_minimax``: the discrete one-parameter sweep of a 2-sphere-like
  surface by latitude polygons between two pole point-curves.  Every interior
  member is shortened each round; the poles are pinned.  The maximal-length
  member homes in on the index-1 saddle; once its gradient is tame, a Newton
  polish is attempted and accepted only if it converges to a geodesic whose
  length stays near the family maximum (so the minimax value is preserved).

* ``refine_newton``: a damped Newton iteration on the transverse vertex
  coordinates using the pseudo-inverse of the transverse Hessian.  Directions
  whose eigenvalue falls below the spectral null threshold are dropped, so
  degenerate critical families (great circles on the round sphere) converge
  onto the critical manifold instead of wandering along it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericError
from .loopspace import (
    ClosedGeodesic,
    PointCurve,
    Polygon,
    birkhoff_shorten,
    birkhoff_shorten_many,
    closed_geodesic,
    grad_length,
    grad_norm,
    length,
    polygon,
    polygon_from_samples,
)
from .manifold import BatchSegments, connect_many
from .manifold import ManifoldHandle
from .spectral import EPS_NULL, build_transverse_frame, transverse_hessian_blocks, assemble_hessian

_STALL_DECREASE = 1e-13
_NEWTON_BURN_IN = 3
_NEWTON_EVERY = 10
_NEWTON_HANDOFF = 1e-3
_ACCEPT_BAND = 0.2


@dataclass
class FinderOptions:
    """Knobs shared by the three procedures.

    N defaults to floor(a / delta) + 1 via ``resolution_for_bound`` when a
    length bound a is known; the finders accept a ready-made value instead.
    """

    N: int | None = None
    max_iters: int = 10000
    grad_tol: float = 1e-10
    family_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.N is not None and self.N < 3:
            raise InputError("polygon size N must be at least 3")
        if self.grad_tol <= 0:
            raise InputError("grad_tol must be positive")
        if self.max_iters < 1 or self.family_size < 2:
            raise InputError("max_iters and family_size must be positive")


def resolution_for_bound(a: float, delta: float) -> int:
    """Polygon size from an upper length bound: floor(a / delta) + 1."""
    if a <= 0:
        raise InputError("length bound must be positive")
    return int(math.floor(a / delta)) + 1


@dataclass(frozen=True)
class Collapsed:
    """Minimization shrank the curve to a point (allowed for null-homotopic
    seeds); carries the final length and the monotone length trace."""

    final_length: float
    trace: list


# ---------------------------------------------------------------------------
# seed constructors (used by the CLI and tests)


def class_seed_polygon(m: ManifoldHandle, klass, N: int) -> Polygon:
    """A polygon in the given free homotopy class of a chart-backend torus.

    Straight coordinate loops, except that a pure longitude class on the
    torus of revolution is offset to v = pi/2 so it is not accidentally
    critical (the outer equator is a geodesic but a saddle, and the shortening
    map would be stuck on it).
    """
    if m.embedded:
        raise InputError("homotopy classes are tracked on chart backends only")
    klass = tuple(int(x) for x in klass)
    if len(klass) != m.dim:
        raise InputError(f"class vector needs {m.dim} components")
    if all(k == 0 for k in klass):
        raise InputError("null class: use an explicit seed polygon instead")
    t = np.linspace(0.0, 1.0, 1024, endpoint=False)
    base = np.zeros(m.dim)
    if m.kind == "torus_of_revolution" and klass[1] == 0:
        base[1] = math.pi / 2.0
    samples = base[None, :] + t[:, None] * (np.array(klass) * m.periods)[None, :]
    return polygon_from_samples(m, m.wrap(samples), N)


def section_polygon(m: ManifoldHandle, axis: int, colatitude: float, N: int) -> Polygon:
    """Polygon inscribed in the plane section of a 2-sphere-like surface at
    the given colatitude from the pole on ``axis``."""
    if not (m.embedded and m.dim == 2):
        raise InputError("section seeds need an embedded 2-dimensional surface")
    axes = np.asarray(m.params if m.kind == "ellipsoid" else [m.params[0]] * 3)
    others = [i for i in range(3) if i != axis]
    phi = np.linspace(0.0, 2.0 * math.pi, 1024, endpoint=False)
    pts = np.zeros((phi.size, 3))
    pts[:, axis] = axes[axis] * math.cos(colatitude)
    pts[:, others[0]] = axes[others[0]] * math.sin(colatitude) * np.cos(phi)
    pts[:, others[1]] = axes[others[1]] * math.sin(colatitude) * np.sin(phi)
    pts = m._geom.project_point(pts)
    return polygon_from_samples(m, pts, N)


# ---------------------------------------------------------------------------
# Newton refinement


def _transverse_grad(p: Polygon, frame: np.ndarray) -> np.ndarray:
    m = p.manifold
    g = grad_length(p)
    X = p.vertex_array
    k = frame.shape[1]
    return np.stack([m.dot(X, g, frame[:, a]) for a in range(k)], axis=1)


def _apply_step(p: Polygon, frame: np.ndarray, step: np.ndarray) -> Polygon:
    m = p.manifold
    X = p.vertex_array + np.einsum("nk,nkm->nm", step, frame)
    X = m.wrap(m.project_point(X))
    return polygon(m, X)


def refine_newton(p: Polygon, opts: FinderOptions | None = None) -> ClosedGeodesic:
    """Newton polish of a near-critical polygon; converged = True iff the
    gradient norm reaches grad_tol * max(1, length)."""
    opts = opts or FinderOptions()
    m = p.manifold
    best = p
    best_gn = grad_norm(p)
    tol = opts.grad_tol
    if best_gn <= tol * max(1.0, length(p)):
        return closed_geodesic(p, method="newton", tol=tol)

    gn = best_gn
    stall = 0
    for _ in range(min(opts.max_iters, 200)):
        frame = build_transverse_frame(p)
        D, C, _ = transverse_hessian_blocks(p)
        H = assemble_hessian(D, C)
        g = _transverse_grad(p, frame).reshape(-1)
        w, Q = np.linalg.eigh(H)
        thr = EPS_NULL * float(np.max(np.abs(w)))
        inv = np.where(np.abs(w) > thr, 1.0 / np.where(w == 0, 1.0, w), 0.0)
        step = -(Q * inv) @ (Q.T @ g)
        cap = m.delta / 8.0
        sn = float(np.max(np.abs(step)))
        if sn > cap:
            step *= cap / sn
        step = step.reshape(p.N, -1)

        improved = False
        for damp in (1.0, 0.5, 0.25, 0.125, 0.0625):
            q = _apply_step(p, frame, damp * step)
            qn = grad_norm(q)
            if qn < gn:
                p, gn = q, qn
                improved = True
                break
        if not improved:
            break
        if gn < best_gn:
            best, best_gn = p, gn
            stall = 0
        else:
            stall += 1
            if stall >= 10:
                break
        if gn <= tol * max(1.0, length(p)):
            return closed_geodesic(p, method="newton", tol=tol)

    out = closed_geodesic(best, method="newton", tol=tol)
    return out


# ---------------------------------------------------------------------------
# minimization in a homotopy class


def minimize_in_class(m: ManifoldHandle, seed_polygon: Polygon,
                      opts: FinderOptions | None = None) -> ClosedGeodesic | Collapsed:
    """Shorten inside the seed's free homotopy class down to a closed geodesic.

    Returns Collapsed when the curve shrinks toward a point (length below
    10 * grad_tol), which is the expected outcome for null-homotopic seeds on
    simply connected manifolds.
    """
    opts = opts or FinderOptions()
    p = seed_polygon
    klass = p.homotopy_class
    L = length(p)
    trace = [(0, L, grad_norm(p))]
    handoff = _NEWTON_HANDOFF
    out = None
    for it in range(1, opts.max_iters + 1):
        q = birkhoff_shorten(p)
        Lq = length(q)
        if Lq > L + 1e-12:
            raise NumericError("shortening step increased length")
        p, decrease, L = q, L - Lq, Lq
        gn = grad_norm(p)
        trace.append((it, L, gn))
        if L < 10.0 * opts.grad_tol:
            return Collapsed(final_length=L, trace=trace)
        if decrease < _STALL_DECREASE or gn <= handoff * max(1.0, L):
            out = refine_newton(p, opts)
            if out.converged or decrease < _STALL_DECREASE:
                break
            # Newton refused the early hand-off; keep shortening with a
            # stricter threshold before trying again
            handoff /= 100.0
            out = None
    if out is None:
        out = refine_newton(p, opts)
    if out.polygon.homotopy_class != klass:
        raise NumericError("minimization left the seed's homotopy class")
    trace.append((len(trace), out.length, out.grad_norm))
    out.method = "minimize"
    out.trace = trace
    return out


# ---------------------------------------------------------------------------
# sweep-out minimax


def _sweep_axis(m: ManifoldHandle) -> int:
    axes = np.asarray(m.params if m.kind == "ellipsoid" else [m.params[0]] * 3)
    order = np.argsort(axes, kind="stable")
    return int(order[1]) if m.kind == "ellipsoid" else 2


def _latitude_family(m: ManifoldHandle, axis: int, F: int, N: int) -> list[Polygon]:
    """F latitude N-gons at colatitudes pi (j+1)/(F+1) around the sweep axis,
    built in one batched edge solve."""
    axes = np.asarray(m.params if m.kind == "ellipsoid" else [m.params[0]] * 3)
    others = [i for i in range(3) if i != axis]
    phi = 2.0 * math.pi * np.arange(N) / N
    colats = math.pi * (np.arange(F) + 1) / (F + 1)
    pts = np.zeros((F, N, 3))
    pts[:, :, axis] = axes[axis] * np.cos(colats)[:, None]
    pts[:, :, others[0]] = axes[others[0]] * np.sin(colats)[:, None] * np.cos(phi)[None, :]
    pts[:, :, others[1]] = axes[others[1]] * np.sin(colats)[:, None] * np.sin(phi)[None, :]
    pts = m._geom.project_point(pts.reshape(-1, 3)).reshape(F, N, 3)
    ends = np.roll(pts, -1, axis=1)
    batch = connect_many(m, pts.reshape(-1, 3), ends.reshape(-1, 3))
    out = []
    for j in range(F):
        sl = slice(j * N, (j + 1) * N)
        out.append(Polygon(m, BatchSegments(
            X0=batch.X0[sl], X1=batch.X1[sl], v0=batch.v0[sl], v1=batch.v1[sl],
            lengths=batch.lengths[sl], samples=batch.samples[sl], disp=None,
        )))
    return out


def sweepout_minimax(m: ManifoldHandle, opts: FinderOptions | None = None,
                     threads: int = 1) -> ClosedGeodesic:
    """Discrete minimax over a family of latitude polygons on a 2-sphere-like
    surface; returns the geodesic the maximal-length member suspends on."""
    if not (m.embedded and m.dim == 2) or m.kind not in ("round_sphere", "ellipsoid"):
        raise InputError("sweep-out needs a round_sphere or ellipsoid with d = 2")
    opts = opts or FinderOptions()
    axis = _sweep_axis(m)
    F = opts.family_size
    if opts.N is None:
        axes = m.params if m.kind == "ellipsoid" else [m.params[0]] * 3
        bound = 1.2 * 2.0 * math.pi * max(axes)
        N = max(8, resolution_for_bound(bound, m.delta))
    else:
        N = opts.N

    members = _latitude_family(m, axis, F, N)
    # the two pole point-curves are pinned and never shortened
    axes_arr = np.asarray(m.params if m.kind == "ellipsoid" else [m.params[0]] * 3)
    pole = np.zeros(3)
    pole[axis] = axes_arr[axis]
    poles = (PointCurve(m, m.point(pole)), PointCurve(m, m.point(-pole)))
    del poles  # bookkeeping endpoints; the interior members carry the sweep

    init_max = max(length(q) for q in members)
    trace = []

    def shorten_all(ms):
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(birkhoff_shorten, ms))
        return birkhoff_shorten_many(ms)

    for it in range(opts.max_iters):
        lengths = np.array([length(q) for q in members])
        mx = int(np.argmax(lengths))          # ties: lowest family index
        max_len = float(lengths[mx])
        max_grad = grad_norm(members[mx])
        trace.append((it, max_len, max_grad))
        if max_len < max(10.0 * opts.grad_tol, 1e-6 * init_max):
            raise NumericError("sweep-out degenerated: family collapsed "
                               "(family_size too small)")
        ready = max_grad <= _NEWTON_HANDOFF * max(1.0, max_len)
        if it >= _NEWTON_BURN_IN and (ready or it % _NEWTON_EVERY == _NEWTON_BURN_IN):
            cand = refine_newton(members[mx], opts)
            if (cand.converged
                    and cand.length >= 0.5 * max_len
                    and abs(cand.length - max_len) <= _ACCEPT_BAND * max(1.0, max_len)):
                cand.method = "sweepout"
                trace.append((it + 1, cand.length, cand.grad_norm))
                cand.trace = trace
                return cand
        members = shorten_all(members)
    raise NumericError("sweep-out did not suspend on a geodesic within max_iters")
