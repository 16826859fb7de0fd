"""Closed geodesic polygons: the finite-dimensional stand-in for the loop space.

A ``Polygon`` is an ordered tuple of vertices (x_0, ..., x_{N-1}) whose
consecutive pairs are within the manifold's safe connection radius, together
with the cached unique geodesic segments joining them (segment i runs from
x_i to x_{i+1 mod N}).  The length functional, its first variation, edge
subdivision, the orientation-reversal and cyclic-rotation group actions, and
the midpoint shortening map all live here.

Vertices and segment data are stored as flat arrays; ``vertices`` and
``segments`` materialize the object views lazily so the hot paths (shortening
loops, finite-difference second variations) stay vectorized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InputError, NumericError, ResolutionError
from .manifold import (
    BatchSegments,
    GeodesicSegment,
    ManifoldHandle,
    PointRep,
    _integrate,
    _segment_from_batch,
    connect_many,
    steps_for,
)

CRITICAL_GRAD_TOL = 1e-10   # scale-invariant: critical iff grad <= tol*max(1, length)


class Polygon:
    """A closed geodesic N-gon.  Immutable after construction."""

    def __init__(self, manifold: ManifoldHandle, batch: BatchSegments,
                 homotopy_class: tuple[int, ...] | None = None):
        if len(batch) < 3:
            raise InputError("a polygon needs at least 3 vertices")
        self.manifold = manifold
        self._batch = batch
        self.N = len(batch)
        if not manifold.embedded:
            winding = batch.disp.sum(axis=0) / manifold.periods
            k = np.rint(winding)
            if np.max(np.abs(winding - k)) > 1e-8:
                raise NumericError("segment displacements do not close up to a lattice vector")
            computed = tuple(int(x) for x in k)
            if homotopy_class is not None and tuple(homotopy_class) != computed:
                raise InputError(
                    f"declared homotopy class {tuple(homotopy_class)} does not match "
                    f"the segment windings {computed}"
                )
            self.homotopy_class = computed
        else:
            self.homotopy_class = None

    # -- views -------------------------------------------------------------

    @property
    def vertex_array(self) -> np.ndarray:
        return self._batch.X0

    @property
    def vertices(self) -> tuple[PointRep, ...]:
        return tuple(PointRep(x.copy()) for x in self._batch.X0)

    @property
    def segments(self) -> tuple[GeodesicSegment, ...]:
        return tuple(_segment_from_batch(self.manifold, self._batch, i)
                     for i in range(self.N))

    @property
    def segment_lengths(self) -> np.ndarray:
        return self._batch.lengths

    def __len__(self):
        return self.N


def polygon(m: ManifoldHandle, vertices: Sequence[PointRep] | np.ndarray) -> Polygon:
    """Close the given vertices into a polygon, solving every edge."""
    if isinstance(vertices, np.ndarray):
        X = np.asarray(vertices, dtype=float)
    else:
        X = np.stack([p.coords for p in vertices])
    if X.ndim != 2 or X.shape[0] < 3:
        raise InputError("need an (N, m) array of at least 3 vertices")
    batch = connect_many(m, X, np.roll(X, -1, axis=0))
    return Polygon(m, batch)


def length(p: Polygon) -> float:
    """Total length: the sum of the segment lengths."""
    return float(np.sum(p._batch.lengths))


def polygon_from_samples(m: ManifoldHandle, samples, N: int) -> Polygon:
    """Resample a densely sampled closed curve into an N-gon with vertices at
    equal arclength along the piecewise-geodesic polyline through the samples,
    starting from samples[0].

    Raises ResolutionError (carrying the minimal admissible N from
    floor(total/delta) + 1) when an edge of the result would exceed delta.
    """
    if N < 3:
        raise InputError("polygon size N must be at least 3")
    if isinstance(samples, np.ndarray):
        S = np.asarray(samples, dtype=float)
    else:
        S = np.stack([p.coords for p in samples])
    if S.shape[0] < 3:
        raise InputError("need at least 3 samples of the closed curve")
    poly = connect_many(m, S, np.roll(S, -1, axis=0))
    cum = np.concatenate([[0.0], np.cumsum(poly.lengths)])
    total = cum[-1]
    if total <= 0:
        raise InputError("sample curve has zero length")
    targets = np.arange(N) * (total / N)
    idx = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(S) - 1)
    offsets = targets - cum[idx]
    X, _ = _integrate(m, poly.X0[idx], poly.v0[idx], offsets, steps_for(m, offsets))
    X = m.wrap(X)
    X[0] = m.wrap(S[0])
    edge_bound = np.linalg.norm(np.diff(np.vstack([X, X[:1]]), axis=0), axis=1)
    min_n = int(math.floor(total / m.delta)) + 1
    try:
        batch = connect_many(m, X, np.roll(X, -1, axis=0))
    except InputError as exc:
        raise ResolutionError(
            f"{N}-gon edges exceed delta for a curve of length {total:.6g}; "
            f"use N >= {min_n}", min_n) from exc
    if np.any(batch.lengths > m.delta * (1 + 1e-7)):
        raise ResolutionError(
            f"{N}-gon edges exceed delta for a curve of length {total:.6g}; "
            f"use N >= {min_n}", min_n)
    return Polygon(m, batch)


def subdivide(p: Polygon, l: int) -> Polygon:
    """Split every edge into l equal-arclength parts (the N-gon to Nl-gon map)."""
    if l < 1:
        raise InputError("subdivision factor must be a positive integer")
    if l == 1:
        return p
    m = p.manifold
    b = p._batch
    N = p.N
    fracs = np.arange(1, l) / l
    starts = np.repeat(b.X0, l - 1, axis=0)
    vels = np.repeat(b.v0, l - 1, axis=0)
    times = (b.lengths[:, None] * fracs[None, :]).reshape(-1)
    X, _ = _integrate(m, starts, vels, times, steps_for(m, times))
    X = m.wrap(X)
    out = np.empty((N * l, b.X0.shape[1]))
    out[::l] = b.X0
    inner = X.reshape(N, l - 1, -1)
    for j in range(1, l):
        out[j::l] = inner[:, j - 1]
    batch = connect_many(m, out, np.roll(out, -1, axis=0))
    return Polygon(m, batch)


def reverse(p: Polygon) -> Polygon:
    """Orientation reversal (x_0, ..., x_{N-1}) -> (x_{N-1}, ..., x_0).

    Segments are reused with start/end and velocities swapped, so lengths are
    preserved exactly and reverse(reverse(p)) == p vertex-for-vertex.
    """
    b = p._batch
    N = p.N
    # new vertex j is old vertex N-1-j; new segment j is old segment N-2-j
    # traversed backwards (and new segment N-1 is old segment N-1 reversed)
    order = np.concatenate([np.arange(N - 2, -1, -1), [N - 1]])
    batch = BatchSegments(
        X0=b.X1[order].copy(),
        X1=b.X0[order].copy(),
        v0=-b.v1[order],
        v1=-b.v0[order],
        lengths=b.lengths[order].copy(),
        samples=b.samples[order][:, ::-1, :].copy(),
        disp=None if b.disp is None else -b.disp[order],
    )
    return Polygon(p.manifold, batch)


def rotate(p: Polygon, k: int) -> Polygon:
    """Cyclic relabeling (x_0, ..., x_{N-1}) -> (x_k, ..., x_{N-1+k mod N})."""
    k = int(k) % p.N
    if k == 0:
        return p
    b = p._batch
    order = np.roll(np.arange(p.N), -k)
    batch = BatchSegments(
        X0=b.X0[order].copy(), X1=b.X1[order].copy(),
        v0=b.v0[order].copy(), v1=b.v1[order].copy(),
        lengths=b.lengths[order].copy(), samples=b.samples[order].copy(),
        disp=None if b.disp is None else b.disp[order].copy(),
    )
    return Polygon(p.manifold, batch)


def grad_length(p: Polygon) -> np.ndarray:
    """First variation of the length functional, one tangent vector per vertex.

    The gradient at x_i is u_in - u_out, the arriving unit tangent of segment
    i-1 minus the departing unit tangent of segment i; it vanishes exactly
    when consecutive segments meet straight, i.e. at closed geodesics.
    Central finite differences of ``length`` reproduce it (tested).
    """
    b = p._batch
    if np.any(b.lengths < 1e-12):
        raise NumericError("degenerate zero-length edge")
    u_in = np.roll(b.v1, 1, axis=0)
    u_out = b.v0
    g = u_in - u_out
    return p.manifold.project_tangent(b.X0, g)


def grad_norm(p: Polygon) -> float:
    g = grad_length(p)
    return float(np.sqrt(np.sum(p.manifold.dot(p.vertex_array, g, g))))


def is_critical(p: Polygon, tol: float = CRITICAL_GRAD_TOL) -> bool:
    return grad_norm(p) <= tol * max(1.0, length(p))


def birkhoff_shorten(p: Polygon) -> Polygon:
    """Replace the polygon by the polygon of its segment arclength midpoints.

    Never increases length, and fixes the polygon (up to relabeling) exactly
    when it is a closed geodesic.  Midpoints of admissible edges are again
    within delta of each other, so the construction cannot leave the space
    unless delta was overridden aggressively (then: ResolutionError).
    """
    m = p.manifold
    b = p._batch
    mid, _ = _integrate(m, b.X0, b.v0, b.lengths / 2.0, steps_for(m, b.lengths / 2.0))
    mid = m.wrap(mid)
    try:
        batch = connect_many(m, mid, np.roll(mid, -1, axis=0))
    except InputError as exc:
        raise ResolutionError(
            "midpoint polygon has an edge beyond delta (overridden delta?)",
            int(math.floor(length(p) / m.delta)) + 1) from exc
    q = Polygon(m, batch)
    if q.homotopy_class != p.homotopy_class:
        raise NumericError("shortening step changed the homotopy class")
    return q


def birkhoff_shorten_many(ps: list[Polygon]) -> list[Polygon]:
    """Shorten a family of polygons on one manifold in a single batched solve."""
    if not ps:
        return []
    m = ps[0].manifold
    if any(q.manifold is not m for q in ps):
        raise InputError("family members must share one manifold handle")
    sizes = [q.N for q in ps]
    X0 = np.concatenate([q._batch.X0 for q in ps])
    v0 = np.concatenate([q._batch.v0 for q in ps])
    L = np.concatenate([q._batch.lengths for q in ps])
    mid, _ = _integrate(m, X0, v0, L / 2.0, steps_for(m, L / 2.0))
    mid = m.wrap(mid)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    ends = np.concatenate([np.roll(mid[offsets[i]:offsets[i + 1]], -1, axis=0)
                           for i in range(len(ps))])
    batch = connect_many(m, mid, ends)
    out = []
    for i, p in enumerate(ps):
        sl = slice(offsets[i], offsets[i + 1])
        sub = BatchSegments(
            X0=batch.X0[sl], X1=batch.X1[sl], v0=batch.v0[sl], v1=batch.v1[sl],
            lengths=batch.lengths[sl], samples=batch.samples[sl],
            disp=None if batch.disp is None else batch.disp[sl],
        )
        q = Polygon(m, sub)
        if q.homotopy_class != p.homotopy_class:
            raise NumericError("shortening step changed the homotopy class")
        out.append(q)
    return out


def iterate_polygon(p: Polygon, n: int) -> Polygon:
    """The n-fold concatenation: the same loop traversed n times, in the
    space of (nN)-gons."""
    if n < 1:
        raise InputError("iteration count must be >= 1")
    if n == 1:
        return p
    b = p._batch
    reps = (n,) + (1,) * (b.X0.ndim - 1)
    batch = BatchSegments(
        X0=np.tile(b.X0, (n, 1)), X1=np.tile(b.X1, (n, 1)),
        v0=np.tile(b.v0, (n, 1)), v1=np.tile(b.v1, (n, 1)),
        lengths=np.tile(b.lengths, n), samples=np.tile(b.samples, (n, 1, 1)),
        disp=None if b.disp is None else np.tile(b.disp, (n, 1)),
    )
    return Polygon(p.manifold, batch)


@dataclass(frozen=True, eq=False)
class PointCurve:
    """The distinguished zero-length (one-point) curve; bookkeeping only.

    Loop-space operations reject it; it exists so sweep-out families and
    counting code can refer to the trivial curves at the ends of a family.
    """

    manifold: ManifoldHandle
    point: PointRep

    @property
    def length(self) -> float:
        return 0.0


@dataclass(eq=False)
class ClosedGeodesic:
    """A critical polygon with its convergence certificate."""

    polygon: Polygon
    length: float
    grad_norm: float
    method: str                 # minimize | sweepout | newton | manual
    converged: bool
    tol: float = CRITICAL_GRAD_TOL
    trace: list | None = None

    def __post_init__(self):
        if self.method not in ("minimize", "sweepout", "newton", "manual"):
            raise InputError(f"unknown method tag {self.method!r}")
        if self.converged and self.grad_norm > self.tol * max(1.0, self.length):
            raise InputError(
                "converged geodesic must satisfy grad_norm <= tol * max(1, length)"
            )


def closed_geodesic(p: Polygon, method: str = "manual",
                    tol: float = CRITICAL_GRAD_TOL,
                    trace: list | None = None) -> ClosedGeodesic:
    gn = grad_norm(p)
    L = length(p)
    return ClosedGeodesic(polygon=p, length=L, grad_norm=gn, method=method,
                          converged=gn <= tol * max(1.0, L), tol=tol, trace=trace)


# ---------------------------------------------------------------------------
# JSON (de)serialization; the CLI consumes and produces these shapes


def manifold_to_json(m: ManifoldHandle) -> dict:
    return {"kind": m.kind, "params": list(m.params), "delta": m.delta}


def manifold_from_json(obj: dict) -> ManifoldHandle:
    from .manifold import make_manifold

    return make_manifold(obj["kind"], obj["params"], delta=obj.get("delta"))


def polygon_to_json(p: Polygon) -> dict:
    out = {
        "manifold": manifold_to_json(p.manifold),
        "vertices": [list(map(float, x)) for x in p.vertex_array],
    }
    if p.homotopy_class is not None:
        out["homotopy_class"] = list(p.homotopy_class)
    return out


def polygon_from_json(obj: dict, m: ManifoldHandle | None = None) -> Polygon:
    if m is None:
        m = manifold_from_json(obj["manifold"])
    X = np.asarray(obj["vertices"], dtype=float)
    p = polygon(m, X)
    if "homotopy_class" in obj and p.homotopy_class is not None:
        if tuple(obj["homotopy_class"]) != p.homotopy_class:
            raise InputError("stored homotopy class does not match the vertices")
    return p


def geodesic_to_json(g: ClosedGeodesic) -> dict:
    return {
        "polygon": polygon_to_json(g.polygon),
        "length": g.length,
        "grad_norm": g.grad_norm,
        "method": g.method,
        "converged": g.converged,
    }


def geodesic_from_json(obj: dict, m: ManifoldHandle | None = None) -> ClosedGeodesic:
    p = polygon_from_json(obj["polygon"], m)
    return closed_geodesic(p, method=obj.get("method", "manual"))
