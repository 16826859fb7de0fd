"""Counting arithmetic for closed geodesics.

Pure integer layer, independent of the geometry modules:

* ``type_numbers``: the local homological counts of an s-fold iterated
  nondegenerate closed geodesic in the space of oriented closed curves, as a
  sparse table k -> m_k over Q or Z_p.  The table depends only on s, the
  coefficient choice, and the indices i(d) of a few divisors d of s; the case
  split turns on the parity of s and of i(2) - i(1).

* ``iterate_parity_check``: rational type numbers of every iterate vanish in
  degrees whose parity differs from i(1), provided the geodesic preserves
  orientation and all iterates are nondegenerate.  Verified by direct
  enumeration through ``type_numbers``.

* ``poincare_series``: rational-cohomology generating functions of the free
  (oriented or unoriented) loop space of the n-sphere relative to the
  one-point curves, expanded to any order by exact integer long division of
  the closed-form rational functions; the absolute series is assembled as
  1 - t^{n+1} + relative.

* ``morse_check``: the alternating chain of inequalities between partial sums
  of critical-set counts M_k and Betti numbers B_k, with equality demanded
  from a declared stabilization rank onward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .errors import InputError

RATIONAL = "rational"


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    i = 2
    while i * i <= p:
        if p % i == 0:
            return False
        i += 1
    return True


def greatest_divisor_coprime_to(s: int, p: int) -> int:
    """Greatest divisor of s not divisible by the prime p."""
    d = s
    while d % p == 0:
        d //= p
    return d


@dataclass(frozen=True)
class TypeNumberQuery:
    """Which iterate, which coefficients, and the index data it needs.

    index_fn maps divisors d of s to the index of the d-th iterate; it must
    cover {1, 2, d_p, s} as demanded by the case split (missing entries raise
    an InputError naming the divisor).
    """

    s: int
    p: int | str
    index_fn: Mapping[int, int]

    def __post_init__(self):
        if self.s < 1:
            raise InputError("iterate order s must be >= 1")
        if self.p != RATIONAL and not (isinstance(self.p, int) and _is_prime(self.p)):
            raise InputError(f"coefficient tag must be a prime or {RATIONAL!r}")

    @property
    def d_p(self) -> int | None:
        if self.p == RATIONAL:
            return None
        return greatest_divisor_coprime_to(self.s, self.p)

    def index(self, d: int) -> int:
        try:
            v = self.index_fn[d]
        except KeyError:
            raise InputError(f"index_fn is missing the divisor {d}") from None
        if v < 0:
            raise InputError(f"index values must be nonnegative (i({d}) = {v})")
        return int(v)


@dataclass(frozen=True)
class TypeNumberTable:
    """Sparse table of nonzero type numbers; every stored value is 1."""

    coefficients: str           # "Q" or "Z<p>"
    entries: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.entries.items():
            if v not in (0, 1) or k < 0:
                raise InputError("type numbers are 0/1 in nonnegative degrees")

    def __getitem__(self, k: int) -> int:
        return self.entries.get(k, 0)

    def total(self) -> int:
        return sum(self.entries.values())

    def support(self) -> list[int]:
        return sorted(k for k, v in self.entries.items() if v)


def _window(lo: int, hi: int) -> dict[int, int]:
    return {k: 1 for k in range(lo, hi + 1)}


def type_numbers(q: TypeNumberQuery) -> TypeNumberTable:
    """Type-number table of the s-th iterate of a prime nondegenerate closed
    geodesic, over Q (q.p == "rational") or over Z_p.

    s = 1: a single 1 in degree i(1) for every coefficient choice.
    s >= 2, with s odd, or s and i(2) - i(1) both even:
        over Q a single 1 in degree i(s); over Z_p ones exactly on the window
        i(d_p) + 2 <= k <= i(s) (empty window: zero table).
    s >= 2 even with i(2) - i(1) odd:
        zero over Q and over Z_p for p != 2; over Z_2 ones on the window
        i(d_2) + 2 <= k <= i(s).
    """
    tag = "Q" if q.p == RATIONAL else f"Z{q.p}"
    if q.s == 1:
        return TypeNumberTable(tag, {q.index(1): 1})

    if q.s % 2 == 1:
        case_a = True
    else:
        case_a = (q.index(2) - q.index(1)) % 2 == 0

    if case_a:
        if q.p == RATIONAL:
            return TypeNumberTable(tag, {q.index(q.s): 1})
        return TypeNumberTable(tag, _window(q.index(q.d_p) + 2, q.index(q.s)))
    # s even with odd first index jump
    if q.p == RATIONAL or q.p != 2:
        return TypeNumberTable(tag, {})
    return TypeNumberTable(tag, _window(q.index(q.d_p) + 2, q.index(q.s)))


@dataclass(frozen=True)
class ParityVerdict:
    passed: bool
    failures: tuple[tuple[int, int], ...]   # offending (iterate n, degree k)


def iterate_parity_check(indices, n_max: int | None = None) -> ParityVerdict:
    """Check that rational type numbers of the iterates vanish off the parity
    of i(1).

    ``indices`` is the sequence i(1), i(2), ..., assumed to come from an
    orientation-preserving prime geodesic with nondegenerate iterates.
    """
    indices = [int(v) for v in indices]
    if n_max is None:
        n_max = len(indices)
    if n_max > len(indices) or n_max < 1:
        raise InputError("need index values for every iterate up to n_max")
    index_fn = {d: indices[d - 1] for d in range(1, n_max + 1)}
    parity = indices[0] % 2
    failures = []
    for n in range(1, n_max + 1):
        table = type_numbers(TypeNumberQuery(s=n, p=RATIONAL, index_fn=index_fn))
        for k in table.support():
            if k % 2 != parity:
                failures.append((n, k))
    return ParityVerdict(passed=not failures, failures=tuple(failures))


# ---------------------------------------------------------------------------
# loop-space series


SPACES = ("omega_plus_rel_M", "omega_rel_M", "omega_plus_abs", "omega_abs")

_SPACE_ALIASES = {
    "omega+rel": "omega_plus_rel_M",
    "omega_rel": "omega_rel_M",
    "omega-rel": "omega_rel_M",
    "omega+abs": "omega_plus_abs",
    "omega_abs": "omega_abs",
    "omega-abs": "omega_abs",
}


def canonical_space(space: str) -> str:
    s = _SPACE_ALIASES.get(space.strip().lower(), space.strip())
    for name in SPACES:
        if s.lower() == name.lower():
            return name
    raise InputError(f"unknown space {space!r}; choose one of {SPACES}")


@dataclass(frozen=True)
class SeriesExpansion:
    space: str
    n: int
    degree: int
    coefficients: tuple[int, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.coefficients):
            raise InputError("series coefficients must be nonnegative integers")


def _add_geometric(coeffs: list[int], a: int, b: int):
    """Add the expansion of t^a / (1 - t^b): ones at a, a+b, a+2b, ..."""
    k = a
    while k < len(coeffs):
        coeffs[k] += 1
        k += b


def _relative_terms(space: str, n: int) -> list[tuple[int, int]]:
    """The (a, b) pairs with sum of t^a / (1 - t^b) equal to the relative
    series of the loop space of the n-sphere."""
    even = n % 2 == 0
    if space == "omega_plus_rel_M":
        if even:
            return [(n - 1, 2), (3 * n - 3, 2 * n - 2)]
        return [(n - 1, 2), (2 * n - 2, n - 1)]
    if even:
        return [(n + 1, 4), (3 * n - 3, 4 * n - 4)]
    return [(n + 1, 4), (2 * n - 2, 2 * n - 2)]


def poincare_series(space: str, n: int, degree: int) -> SeriesExpansion:
    """Exact coefficients, to the given degree, of the rational-cohomology
    series of the (oriented or unoriented) loop space of the n-sphere,
    relative to the one-point curves or absolute."""
    space = canonical_space(space)
    if degree < 0:
        raise InputError("truncation degree must be nonnegative")
    if n < 2:
        # the odd-dimension branch needs n >= 3, the even branch n >= 2
        raise InputError("sphere dimension must be >= 2")

    rel_space = ("omega_plus_rel_M" if space in ("omega_plus_rel_M", "omega_plus_abs")
                 else "omega_rel_M")
    coeffs = [0] * (degree + 1)
    for a, b in _relative_terms(rel_space, n):
        _add_geometric(coeffs, a, b)
    if space in ("omega_plus_abs", "omega_abs"):
        coeffs[0] += 1
        if n + 1 <= degree:
            coeffs[n + 1] -= 1
    return SeriesExpansion(space=space, n=n, degree=degree,
                           coefficients=tuple(coeffs))


# ---------------------------------------------------------------------------
# the inequality chain


@dataclass(frozen=True)
class MorseCheckInput:
    """Counts M_k, Betti numbers B_k, and the rank r_star from which the
    alternating sums must agree exactly (default: the truncation rank)."""

    M_list: tuple[int, ...]
    B_list: tuple[int, ...]
    r_star: int | None = None

    def __post_init__(self):
        if len(self.M_list) != len(self.B_list):
            raise InputError("M and B lists must have equal length")
        if not self.M_list:
            raise InputError("need at least one rank")
        if any(v < 0 for v in self.M_list + self.B_list):
            raise InputError("counts and Betti numbers are nonnegative")
        rs = self.r_star if self.r_star is not None else len(self.M_list) - 1
        if not 0 <= rs <= len(self.M_list) - 1:
            raise InputError("r_star must be a rank within the lists")


@dataclass(frozen=True)
class MorseVerdict:
    passed: bool
    failed_rank: int | None
    failed_kind: str | None        # "inequality" | "equality"
    per_k_dominance: tuple[bool, ...]   # M_k >= B_k, reported per degree


def morse_check(inp: MorseCheckInput) -> MorseVerdict:
    """Verify, for every rank r, that the alternating partial sum of M
    dominates that of B (r = 0 is M_0 >= B_0, r = 1 is M_0 - M_1 <= B_0 - B_1,
    and so on), with equality for every r >= r_star."""
    M, B = inp.M_list, inp.B_list
    R = len(M) - 1
    r_star = inp.r_star if inp.r_star is not None else R
    failed_rank = None
    failed_kind = None
    for r in range(R + 1):
        sM = sum((-1) ** (r - j) * M[j] for j in range(r + 1))
        sB = sum((-1) ** (r - j) * B[j] for j in range(r + 1))
        if sM < sB:
            failed_rank, failed_kind = r, "inequality"
            break
        if r >= r_star and sM != sB:
            failed_rank, failed_kind = r, "equality"
            break
    dominance = tuple(M[k] >= B[k] for k in range(R + 1))
    return MorseVerdict(passed=failed_rank is None, failed_rank=failed_rank,
                        failed_kind=failed_kind, per_k_dominance=dominance)
