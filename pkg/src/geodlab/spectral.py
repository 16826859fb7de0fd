"""Local stability data of a closed geodesic.

Everything here is built from two discrete objects:

* the transverse Hessian: the second variation of the length functional on
  the product of small hypersurface slices through the vertices, each slice
  orthogonal to the outgoing edge.  It is computed by central finite
  differences of the analytic first variation in per-vertex orthonormal
  transverse frames, and it is cyclically block-tridiagonal: diagonal blocks
  D_i and coupling blocks C_i between consecutive vertices (C_{N-1} wraps
  around).  Multiplying the wrap-around block by a unit-modulus z imposes the
  twisted boundary condition xi_{i+N} = z xi_i; the count of negative
  eigenvalues of the resulting Hermitian matrix as a function of z is the
  index function sampled by ``bott_functions``.

* the linearized return map: the monodromy of the normal Jacobi equation
  y'' + K(t) y = 0 integrated in a parallel normal frame around the loop
  (64 RK4 steps per polygon edge), a symplectic 2(d-1) x 2(d-1) matrix.

The n-fold iterate's index/nullity can be computed two independent ways: by
summing the twisted counts over n-th roots of unity (roots of -1 when the
loop holonomy reverses orientation), or directly from the Hessian of the
n-fold concatenated polygon.  ``iterated_index(mode="both")`` cross-checks
them and raises a ConsistencyError on mismatch.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, InputError, NumericError, NumericWarning
from .loopspace import ClosedGeodesic, Polygon, closed_geodesic, iterate_polygon, subdivide
from .manifold import _integrate, connect_many, transport_many

EPS_NULL = 1e-6           # relative threshold separating zero eigenvalues
MIN_SPECTRAL_N = 32       # polygons are refined to at least this many edges
FD_STEP = 1e-4
JACOBI_STEPS_PER_EDGE = 64


# ---------------------------------------------------------------------------
# frames and the transverse Hessian


def build_transverse_frame(p: Polygon) -> np.ndarray:
    """Per-vertex orthonormal basis of the (d-1)-plane orthogonal to the
    outgoing edge direction; shape (N, d-1, m)."""
    m = p.manifold
    X = p.vertex_array
    u = p._batch.v0
    d = m.dim
    cands = m.tangent_basis(X)                       # (N, d, m)
    cands = cands - m.dot(X[:, None, :], cands, u[:, None, :])[..., None] * u[:, None, :]
    frame = np.empty((p.N, d - 1, X.shape[1]))
    taken = np.zeros((p.N, d), dtype=bool)
    for a in range(d - 1):
        nrm2 = m.dot(X[:, None, :], cands, cands)
        nrm2 = np.where(taken, -1.0, nrm2)
        pick = np.argmax(nrm2, axis=1)
        rows = np.arange(p.N)
        v = cands[rows, pick]
        v = v / m.norm(X, v)[:, None]
        frame[:, a] = v
        taken[rows, pick] = True
        cands = cands - m.dot(X[:, None, :], cands, v[:, None, :])[..., None] * v[:, None, :]
    return frame


def transverse_hessian_blocks(p: Polygon, h: float = FD_STEP):
    """Blocks (D, C) of the transverse Hessian and the raw asymmetry.

    D[i] couples vertex i to itself, C[i] couples vertex i to vertex i+1 mod N.
    """
    m = p.manifold
    b = p._batch
    N, md = b.X0.shape
    k = m.dim - 1
    F = build_transverse_frame(p)

    # perturbed vertices: index order (i, a, sign) -> flat row
    base = np.repeat(b.X0, 2 * k, axis=0).reshape(N, k, 2, md)
    dirs = F[:, :, None, :] * np.array([1.0, -1.0])[None, None, :, None] * h
    Xp = m.project_point((base + dirs).reshape(-1, md))
    nrows = Xp.shape[0]

    prev_start = np.repeat(np.roll(b.X0, 1, axis=0), 2 * k, axis=0)
    next_end = np.repeat(np.roll(b.X0, -1, axis=0), 2 * k, axis=0)
    batch = connect_many(m, np.concatenate([prev_start, Xp]),
                         np.concatenate([m.wrap(Xp), next_end]))
    v0_prev = batch.v0[:nrows]
    v1_prev = batch.v1[:nrows]
    v0_next = batch.v0[nrows:]
    v1_next = batch.v1[nrows:]

    # gradient components on the base frames at vertices i-1, i, i+1
    iv = np.repeat(np.arange(N), 2 * k)
    g_prev = np.roll(b.v1, 2, axis=0)[np.repeat(np.arange(N), 2 * k)] - v0_prev
    g_mid = v1_prev - v0_next
    g_next = v1_next - b.v0[(iv + 1) % N]

    def comps(vertex_idx, g):
        Xv = b.X0[vertex_idx]
        return np.stack([m.dot(Xv, g, F[vertex_idx, bb]) for bb in range(k)], axis=-1)

    c_prev = comps((iv - 1) % N, g_prev).reshape(N, k, 2, k)
    c_mid = comps(iv, g_mid).reshape(N, k, 2, k)
    c_next = comps((iv + 1) % N, g_next).reshape(N, k, 2, k)

    colD = (c_mid[:, :, 0] - c_mid[:, :, 1]) / (2 * h)      # (N, a, b)
    col_prev = (c_prev[:, :, 0] - c_prev[:, :, 1]) / (2 * h)
    col_next = (c_next[:, :, 0] - c_next[:, :, 1]) / (2 * h)

    D = np.swapaxes(colD, 1, 2)          # D[i][b, a] = d^2 f / d s_{i,b} d s_{i,a}
    Craw = col_next                      # Craw[i][a, b] estimates C_i[a, b]
    C = np.empty_like(Craw)
    for i in range(N):
        # C[i] couples (i, i+1): entry [a, b] = d^2 f / ds_{i,a} ds_{i+1,b};
        # averaged with the independent estimate from the (i+1)-column
        C[i] = 0.5 * (Craw[i] + col_prev[(i + 1) % N].T)

    asym = 0.0
    scale = max(np.max(np.abs(D)), np.max(np.abs(C)), 1e-30)
    asym = max(
        float(np.max(np.abs(D - np.swapaxes(D, 1, 2)))) / scale,
        float(np.max(np.abs(Craw - np.swapaxes(col_prev[(np.arange(N) + 1) % N], 1, 2)))) / scale,
    )
    D = 0.5 * (D + np.swapaxes(D, 1, 2))
    return D, C, asym


def assemble_hessian(D: np.ndarray, C: np.ndarray, z: complex | None = None) -> np.ndarray:
    """Assemble the cyclic block matrix; a unit-modulus z twists the
    wrap-around coupling block (z = None or 1 gives the plain real form)."""
    N, k, _ = D.shape
    zz = 1.0 if z is None else complex(z)
    if zz == 1.0:
        zz = 1.0  # plain real assembly
    dtype = float if isinstance(zz, float) else complex
    H = np.zeros((N * k, N * k), dtype=dtype)
    for i in range(N):
        sl = slice(i * k, (i + 1) * k)
        H[sl, sl] = D[i]
    for i in range(N - 1):
        H[i * k:(i + 1) * k, (i + 1) * k:(i + 2) * k] += C[i]
        H[(i + 1) * k:(i + 2) * k, i * k:(i + 1) * k] += C[i].T
    last = slice((N - 1) * k, N * k)
    first = slice(0, k)
    H[last, first] += zz * C[N - 1]
    H[first, last] += np.conj(zz) * C[N - 1].T
    return H


def _ensure_resolution(g: ClosedGeodesic) -> ClosedGeodesic:
    p = g.polygon
    if p.N >= MIN_SPECTRAL_N:
        return g
    factor = math.ceil(MIN_SPECTRAL_N / p.N)
    q = subdivide(p, factor)
    out = closed_geodesic(q, method=g.method, tol=g.tol)
    if not out.converged:
        raise NumericError("refined polygon lost criticality; refine and re-solve first")
    return out


def _require_converged(g: ClosedGeodesic):
    if not g.converged:
        raise InputError("spectral data needs a converged closed geodesic")


def hessian(g: ClosedGeodesic) -> np.ndarray:
    """Symmetric second variation of length on the transverse product."""
    _require_converged(g)
    g = _ensure_resolution(g)
    D, C, asym = transverse_hessian_blocks(g.polygon)
    if asym > 1e-5:
        warnings.warn(
            f"transverse Hessian asymmetry {asym:.2e} above 1e-5 before symmetrization",
            NumericWarning,
        )
    return assemble_hessian(D, C)


def _counts(eigs: np.ndarray):
    sigma = float(np.max(np.abs(eigs)))
    thr = EPS_NULL * sigma
    index = int(np.sum(eigs < -thr))
    nullity = int(np.sum(np.abs(eigs) <= thr))
    border = int(np.sum((np.abs(eigs) > thr) & (np.abs(eigs) <= 10 * thr)))
    return index, nullity, border


def index_nullity(g: ClosedGeodesic) -> tuple[int, int]:
    """Counts of negative and zero eigenvalues of the transverse Hessian."""
    H = hessian(g)
    eigs = np.linalg.eigvalsh(H)
    index, nullity, border = _counts(eigs)
    if border:
        warnings.warn(
            f"{border} eigenvalue(s) in the borderline band (1..10) x eps_null x sigma",
            NumericWarning,
        )
    return index, nullity


# ---------------------------------------------------------------------------
# linearized return map


def _curvature_along_edges(g: ClosedGeodesic):
    """Positions are integrated at double resolution so the Jacobi RK4 has
    curvature values at step midpoints; returns K of shape (2S+1, N)."""
    p = g.polygon
    m = p.manifold
    b = p._batch
    n_rec = 2 * JACOBI_STEPS_PER_EDGE
    _, _, rec = _integrate(m, b.X0, b.v0, b.lengths, n_rec, n_record=n_rec)
    return m.gauss_curvature(rec)


def poincare_map(g: ClosedGeodesic) -> np.ndarray:
    """Monodromy of the normal Jacobi equation around the loop, as a
    symplectic matrix of size 2(d-1) on (y, y') pairs."""
    _require_converged(g)
    g = _ensure_resolution(g)
    p = g.polygon
    m = p.manifold
    k = m.dim - 1
    if m.dim != 2:
        if not m._geom.curvature_is_constant():
            raise InputError("return maps above dimension 2 need constant curvature")
        K = 1.0 / m.params[0] ** 2 if m.kind == "round_sphere" else 0.0
        L = g.length
        if K > 0:
            w = math.sqrt(K)
            A, B = math.cos(w * L), math.sin(w * L) / w
            Cc, Dd = -w * math.sin(w * L), math.cos(w * L)
        else:
            A, B, Cc, Dd = 1.0, L, 0.0, 1.0
        P = np.zeros((2 * k, 2 * k))
        P[:k, :k] = A * np.eye(k)
        P[:k, k:] = B * np.eye(k)
        P[k:, :k] = Cc * np.eye(k)
        P[k:, k:] = Dd * np.eye(k)
        return P

    K = _curvature_along_edges(g)                    # (2S+1, N)
    N = p.N
    h = (p.segment_lengths / JACOBI_STEPS_PER_EDGE)[:, None, None]
    Y = np.broadcast_to(np.eye(2), (N, 2, 2)).copy()

    def jmul(Kv, Yv):
        out = np.empty_like(Yv)
        out[:, 0, :] = Yv[:, 1, :]
        out[:, 1, :] = -Kv[:, None] * Yv[:, 0, :]
        return out

    for s in range(JACOBI_STEPS_PER_EDGE):
        K0, Kh, K1 = K[2 * s], K[2 * s + 1], K[2 * s + 2]
        k1 = jmul(K0, Y)
        k2 = jmul(Kh, Y + 0.5 * h * k1)
        k3 = jmul(Kh, Y + 0.5 * h * k2)
        k4 = jmul(K1, Y + h * k3)
        Y = Y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    P = np.eye(2)
    for i in range(N):
        P = Y[i] @ P
    if not np.all(np.isfinite(P)):
        raise NumericError("Jacobi propagation produced non-finite values")
    return P


def symplectic_defect(P: np.ndarray) -> float:
    k = P.shape[0] // 2
    J = np.zeros_like(P)
    J[:k, k:] = np.eye(k)
    J[k:, :k] = -np.eye(k)
    return float(np.linalg.norm(P.T @ J @ P - J))


def poincare_eigenvalues(P: np.ndarray) -> np.ndarray:
    return np.linalg.eigvals(P)


def orientation_preserving(g: ClosedGeodesic) -> bool:
    """Whether parallel transport of a full tangent frame around the loop has
    positive determinant."""
    _require_converged(g)
    p = g.polygon
    m = p.manifold
    b = p._batch
    X0 = b.X0[0]
    frame = m.tangent_basis(X0[None, :])[0]          # (d, m)
    W = frame[None, :, :]
    for i in range(p.N):
        W = transport_many(m, b.X0[i][None, :], b.v0[i][None, :],
                           np.array([b.lengths[i]]), W)
    Mmat = np.array([[float(m.dot(X0, W[0, a], frame[bb]))
                      for bb in range(m.dim)] for a in range(m.dim)])
    det = float(np.linalg.det(Mmat))
    if abs(abs(det) - 1.0) > 1e-6:
        raise NumericError(f"holonomy determinant {det} is not close to +-1")
    return det > 0


# ---------------------------------------------------------------------------
# Bott samples and iterated indices


@dataclass(frozen=True)
class BottSample:
    z: complex
    lam: int      # negative count of the z-twisted Hessian
    n_of_z: int   # dim ker(P - z)


def _kernel_dim(P: np.ndarray, z: complex) -> int:
    A = P - z * np.eye(P.shape[0])
    s = np.linalg.svd(A, compute_uv=False)
    thr = EPS_NULL * max(1.0, float(np.linalg.norm(P, 2)))
    return int(np.sum(s < thr))


def _twisted_index(D, C, z: complex) -> int:
    H = assemble_hessian(D, C, z)
    eigs = np.linalg.eigvalsh(H)
    index, _, _ = _counts(eigs)
    return index


def _unit_eig_args(P: np.ndarray) -> list[float]:
    lam = np.linalg.eigvals(P)
    out = []
    for v in lam:
        if abs(abs(v) - 1.0) <= 1e-6 * max(1.0, float(np.linalg.norm(P, 2))):
            out.append(float(np.angle(v)) % (2 * math.pi))
    return sorted(out)


def bott_functions(g: ClosedGeodesic, grid: int = 16,
                   extra_orders: tuple[int, ...] = ()) -> list[BottSample]:
    """Sample the index and kernel-dimension functions on the unit circle at
    the M-th roots of unity (plus the roots needed for the given iterate
    orders)."""
    if grid < 8:
        raise InputError("bott grid must have at least 8 points")
    _require_converged(g)
    g = _ensure_resolution(g)
    D, C, _ = transverse_hessian_blocks(g.polygon)
    P = poincare_map(g)

    args = {(2 * math.pi * j / grid) % (2 * math.pi) for j in range(grid)}
    if extra_orders:
        preserve = orientation_preserving(g)
        for n in extra_orders:
            for j in range(n):
                theta = (2 * math.pi * j + (0.0 if preserve else math.pi)) / n
                args.add(theta % (2 * math.pi))

    eig_args = _unit_eig_args(P)
    if len(eig_args) >= 2:
        gaps = np.diff(np.array(eig_args + [eig_args[0] + 2 * math.pi]))
        if float(np.min(gaps[gaps > 1e-9], initial=np.inf)) < 2 * math.pi / grid:
            warnings.warn(
                "bott grid too coarse to isolate eigenvalue crossings at args "
                + ", ".join(f"{a:.6f}" for a in eig_args),
                NumericWarning,
            )

    samples = []
    for theta in sorted(args):
        z = cmath.exp(1j * theta)
        samples.append(BottSample(z=z, lam=_twisted_index(D, C, z),
                                  n_of_z=_kernel_dim(P, z)))
    return samples


def iterated_index(g: ClosedGeodesic, n: int, mode: str = "both") -> tuple[int, int]:
    """Index and nullity of the n-fold iterate.

    mode "bott" sums the twisted counts over the n-th roots of +-1 (sign from
    the orientation behavior); mode "direct" measures the n-fold concatenated
    polygon; mode "both" computes both and insists they agree.
    """
    if n < 1:
        raise InputError("iterate order must be >= 1")
    if mode not in ("bott", "direct", "both"):
        raise InputError(f"unknown mode {mode!r}")
    _require_converged(g)
    gg = _ensure_resolution(g)

    result = {}
    if mode in ("bott", "both"):
        D, C, _ = transverse_hessian_blocks(gg.polygon)
        P = poincare_map(gg)
        preserve = orientation_preserving(gg)
        lam_sum = 0
        nu_sum = 0
        per_root = []
        for j in range(n):
            theta = (2 * math.pi * j + (0.0 if preserve else math.pi)) / n
            z = cmath.exp(1j * theta)
            lam = _twisted_index(D, C, z)
            nu = _kernel_dim(P, z)
            per_root.append({"arg": theta, "lam": lam, "n": nu})
            lam_sum += lam
            nu_sum += nu
        result["bott"] = (lam_sum, nu_sum)
        result["per_root"] = per_root
    if mode in ("direct", "both"):
        q = iterate_polygon(gg.polygon, n)
        cg = closed_geodesic(q, method="manual", tol=gg.tol)
        result["direct"] = index_nullity(cg)

    if mode == "bott":
        return result["bott"]
    if mode == "direct":
        return result["direct"]
    if result["bott"] != result["direct"]:
        raise ConsistencyError(
            f"iterated index mismatch at n={n}: twisted-sum {result['bott']} "
            f"vs direct {result['direct']}",
            report={"n": n, "bott": result["bott"], "direct": result["direct"],
                    "per_root": result["per_root"]},
        )
    return result["direct"]


# ---------------------------------------------------------------------------
# aggregate record


@dataclass(eq=False)
class SpectralData:
    geodesic: ClosedGeodesic
    index: int
    nullity: int
    poincare_matrix: np.ndarray
    poincare_eigenvalues: np.ndarray
    orientation_preserving: bool
    bott_samples: list[BottSample]

    def __post_init__(self):
        defect = symplectic_defect(self.poincare_matrix)
        if defect > 1e-6:
            raise NumericError(f"return map fails the symplectic test ({defect:.2e})")


def spectral_data(g: ClosedGeodesic, grid: int = 16,
                  extra_orders: tuple[int, ...] = ()) -> SpectralData:
    idx, nul = index_nullity(g)
    P = poincare_map(g)
    return SpectralData(
        geodesic=g,
        index=idx,
        nullity=nul,
        poincare_matrix=P,
        poincare_eigenvalues=poincare_eigenvalues(P),
        orientation_preserving=orientation_preserving(g),
        bott_samples=bott_functions(g, grid=grid, extra_orders=extra_orders),
    )


def spectral_to_json(sd: SpectralData) -> dict:
    return {
        "index": sd.index,
        "nullity": sd.nullity,
        "poincare_matrix": [[float(x) for x in row] for row in sd.poincare_matrix],
        "eigenvalues": [[float(v.real), float(v.imag)] for v in sd.poincare_eigenvalues],
        "orientation_preserving": sd.orientation_preserving,
        "bott_samples": [
            {"z_arg": float(cmath.phase(s.z) % (2 * math.pi)), "lambda": s.lam, "n": s.n_of_z}
            for s in sd.bott_samples
        ],
    }


def primality_hint(p: Polygon, tol: float = 1e-8) -> int:
    """Advisory only: the apparent iteration multiplicity of the polygon,
    from the smallest cyclic shift that maps the vertex list onto itself.
    Returns 1 when the polygon looks prime."""
    m = p.manifold
    X = p.vertex_array
    N = p.N
    scale = max(1.0, float(np.max(np.abs(X))))
    for k in range(1, N):
        if N % k:
            continue
        shifted = X[(np.arange(N) + k) % N]
        diff = shifted - X
        if not m.embedded:
            per = m.periods
            diff = (diff + per / 2) % per - per / 2
        if float(np.max(np.abs(diff))) <= tol * scale:
            return N // k
    return 1
