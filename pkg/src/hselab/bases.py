"""Basis families for alphabet encoding, and distances between bases.

Provides the concrete constructions the protocol analysis relies on
(standard, Fourier, the qutrit 4-basis complete set, the qubit six-state
triple, quadratic-phase complete sets in odd prime dimension, a frozen
complete set for d=4, the Breidbart basis) plus the chordal Grassmannian
distance machinery that ties basis geometry to the index error rate.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, DimensionError, InvalidParameter
from .hilbert import TAU_NORM, Basis, verify_orthonormal
from .rng import RandomStream

TAU_DISTINCT = 1e-6


@dataclass(frozen=True, eq=False)
class BasisSet:
    """An ordered family of c bases of C^d encoding a c-letter alphabet.

    Members are relabeled "B0".."B{c-1}".  Construction enforces that all
    members are orthonormal and that no two bases share a state: every
    cross-basis transition probability stays below 1 - TAU_DISTINCT.
    """

    c: int
    d: int
    bases: tuple

    def __init__(self, bases):
        bases = tuple(bases)
        if len(bases) < 2:
            raise InvalidParameter("a basis set needs at least 2 bases")
        d = bases[0].dim
        for b in bases:
            if b.dim != d:
                raise DimensionError("all bases in a set must share one dimension")
            report = verify_orthonormal(b, TAU_NORM)
            if not report.ok:
                raise InvalidParameter(f"basis {b.label!r} fails orthonormality: {report.max_deviation:.3e}")
        relabeled = tuple(b.relabeled(f"B{x}") for x, b in enumerate(bases))
        for x in range(len(relabeled)):
            for y in range(x + 1, len(relabeled)):
                shared = _max_transition_prob(relabeled[x], relabeled[y])
                if shared > 1.0 - TAU_DISTINCT:
                    raise InvalidParameter(
                        f"bases B{x} and B{y} share a state (transition prob {shared:.9f})"
                    )
        object.__setattr__(self, "c", len(relabeled))
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "bases", relabeled)

    def __iter__(self):
        return iter(self.bases)


@dataclass(frozen=True)
class UnbiasednessReport:
    ok: bool
    max_dev: float


@dataclass(frozen=True)
class DistanceReport:
    """Pairwise squared distances within a set, plus the Eve average."""

    pairwise: np.ndarray
    average_to_eve: float | None


def _max_transition_prob(b1: Basis, b2: Basis) -> float:
    gram = b1.matrix.conj().T @ b2.matrix
    return float(np.max(gram.real**2 + gram.imag**2))


def standard_basis(d: int) -> Basis:
    """The computational basis: columns of the d x d identity."""
    if d < 2:
        raise InvalidParameter("dimension must be >= 2")
    return Basis(f"standard({d})", np.eye(d, dtype=np.complex128), validate=False)


def fourier_basis(d: int) -> Basis:
    """The discrete Fourier basis: entries omega^(jk)/sqrt(d).

    Mutually unbiased to the standard basis in every dimension, including
    composite ones, since all entries have modulus 1/sqrt(d).
    """
    if d < 2:
        raise InvalidParameter("dimension must be >= 2")
    j, k = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    matrix = np.exp(2j * np.pi * j * k / d) / math.sqrt(d)
    return Basis(f"fourier({d})", matrix)


def qutrit_complete_set() -> BasisSet:
    """The complete set of four mutually unbiased qutrit bases.

    Exact matrices, column-ordered; members are the standard basis, the
    Fourier basis, and its two quadratic-phase companions.
    """
    w = cmath.exp(2j * cmath.pi / 3)
    s = 1 / math.sqrt(3)
    b0 = np.eye(3, dtype=np.complex128)
    b1 = s * np.array([[1, 1, 1], [1, w, w**2], [1, w**2, w]])
    b2 = s * np.array([[1, 1, 1], [w**2, 1, w], [w**2, w, 1]])
    b3 = s * np.array([[1, 1, 1], [w, w**2, 1], [w, 1, w**2]])
    return BasisSet(Basis(f"q{i}", m) for i, m in enumerate((b0, b1, b2, b3)))


def qubit_six_state_set() -> BasisSet:
    """The three mutually unbiased qubit bases (six-state protocol states).

    Z eigenstates, X eigenstates (Hadamard), and Y eigenstates, in that
    order; on the Bloch sphere these are the six points (0,0,±1),
    (±1,0,0), (0,±1,0).
    """
    s = 1 / math.sqrt(2)
    b0 = np.eye(2, dtype=np.complex128)
    b1 = s * np.array([[1, 1], [1, -1]], dtype=np.complex128)
    b2 = s * np.array([[1, 1], [1j, -1j]], dtype=np.complex128)
    return BasisSet(Basis(f"s{i}", m) for i, m in enumerate((b0, b1, b2)))


def prime_complete_set(d: int, c: int) -> BasisSet:
    """c pairwise-MU bases in odd prime dimension d (2 <= c <= d+1).

    The standard basis plus quadratic-phase bases: family member a has
    vectors v_j with components omega^(a k^2 + j k)/sqrt(d).  The result
    is gated by the unbiasedness checker before being returned, so the
    particular family is not load-bearing.
    """
    if not _is_odd_prime(d):
        raise InvalidParameter(f"dimension {d} is not an odd prime")
    if not 2 <= c <= d + 1:
        raise InvalidParameter(f"need 2 <= c <= d+1 = {d + 1}, got c = {c}")
    members = [standard_basis(d)]
    k = np.arange(d)
    for a in range(c - 1):
        phases = (a * k[None, :] ** 2 + k[:, None] * k[None, :]) % d
        matrix = np.exp(2j * np.pi * phases / d).T / math.sqrt(d)
        members.append(Basis(f"quad({d},{a})", matrix))
    for i in range(len(members)):
        for j in range(i + 1, len(members)):
            report = is_mutually_unbiased(members[i], members[j], 1e-10)
            if not report.ok:
                raise ConstructionError(
                    f"bases {i} and {j} of prime_complete_set({d},{c}) "
                    f"not mutually unbiased: {report.max_dev:.3e}"
                )
    return BasisSet(members)


# Complete MU set for d=4 (not covered by the odd-prime family): common
# eigenbases of the five commuting two-qubit Pauli classes.  Entries are
# exactly 0, ±1/2, ±i/2; pairwise unbiasedness deviation is exactly 0.
_D4_ROWS = {
    "h": (1, 1, 1, 1),
    "a": (1, 1, -1, -1),
    "b": (1, -1, 1, -1),
    "c": (1, -1, -1, 1),
    "p": (1j, -1j, 1j, -1j),
    "q": (-1j, 1j, 1j, -1j),
}
_D4_LAYOUT = (("h", "a", "b", "c"), ("h", "p", "q", "a"), ("h", "a", "p", "q"), ("h", "p", "a", "q"))


def _d4_complete_set(c: int) -> BasisSet:
    if not 2 <= c <= 5:
        raise InvalidParameter(f"need 2 <= c <= 5 for d=4, got c = {c}")
    members = [standard_basis(4)]
    for i, rows in enumerate(_D4_LAYOUT):
        matrix = 0.5 * np.array([_D4_ROWS[r] for r in rows], dtype=np.complex128)
        members.append(Basis(f"pauli4({i})", matrix))
    return BasisSet(members[:c])


def mu_basis_set(d: int, c: int) -> BasisSet:
    """c mutually unbiased bases in dimension d, from the best-known family.

    Covers d = 2 and 3 (canonical small sets), d = 4 (frozen Pauli-class
    set), odd primes (quadratic family).  Other dimensions only support
    c = 2 via {standard, Fourier}.
    """
    if d < 2 or c < 2:
        raise InvalidParameter("need d >= 2 and c >= 2")
    if d == 2:
        if c > 3:
            raise InvalidParameter("dimension 2 has at most 3 MU bases")
        return BasisSet(qubit_six_state_set().bases[:c])
    if d == 3:
        if c > 4:
            raise InvalidParameter("dimension 3 has at most 4 MU bases")
        return BasisSet(qutrit_complete_set().bases[:c])
    if d == 4:
        return _d4_complete_set(c)
    if _is_odd_prime(d):
        return prime_complete_set(d, c)
    if c == 2:
        return BasisSet([standard_basis(d), fourier_basis(d)])
    raise InvalidParameter(f"no construction for {c} MU bases in dimension {d}")


def breidbart_basis() -> Basis:
    """The qubit basis halfway between the standard and Hadamard bases.

    Rotation by pi/8: equidistant (D^2 = 1/4) from both.
    """
    t = math.pi / 8
    matrix = np.array(
        [[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]], dtype=np.complex128
    )
    return Basis("breidbart", matrix, validate=False)


def grassmannian_distance(b1: Basis, b2: Basis) -> float:
    """Squared chordal Grassmannian distance between two basis planes.

    D^2 = 1 - (1/d) sum_ij |<v_i|w_j>|^4.  Bounded by [0, 1 - 1/d]; zero
    for identical planes, maximal exactly for mutually unbiased bases.
    """
    if b1.dim != b2.dim:
        raise DimensionError(f"dimension mismatch: {b1.dim} vs {b2.dim}")
    gram = b1.matrix.conj().T @ b2.matrix
    quartic = float(np.sum((gram.real**2 + gram.imag**2) ** 2))
    return 1.0 - quartic / b1.dim


def average_distance(eve: Basis, basis_set) -> float:
    """Mean squared distance from an Eve basis to each member of a set.

    Accepts a BasisSet or any sequence of Basis.  Equal to the index
    transmission error rate of an intercept-and-resend attack in `eve`.
    """
    members = list(basis_set.bases if isinstance(basis_set, BasisSet) else basis_set)
    if not members:
        raise InvalidParameter("need at least one basis")
    return sum(grassmannian_distance(b, eve) for b in members) / len(members)


def distance_report(basis_set: BasisSet, eve: Basis | None = None) -> DistanceReport:
    """Pairwise D^2 matrix of a set, plus the average to Eve if given."""
    c = basis_set.c
    pairwise = np.zeros((c, c))
    for x in range(c):
        for y in range(x + 1, c):
            d2 = grassmannian_distance(basis_set.bases[x], basis_set.bases[y])
            pairwise[x, y] = pairwise[y, x] = d2
    avg = average_distance(eve, basis_set) if eve is not None else None
    return DistanceReport(pairwise=pairwise, average_to_eve=avg)


def is_mutually_unbiased(b1: Basis, b2: Basis, tol: float) -> UnbiasednessReport:
    """Check max_ij | |<v_i|w_j>|^2 - 1/d | <= tol."""
    if b1.dim != b2.dim:
        raise DimensionError(f"dimension mismatch: {b1.dim} vs {b2.dim}")
    if tol <= 0:
        raise InvalidParameter("tolerance must be positive")
    gram = b1.matrix.conj().T @ b2.matrix
    dev = float(np.max(np.abs(gram.real**2 + gram.imag**2 - 1.0 / b1.dim)))
    return UnbiasednessReport(ok=dev <= tol, max_dev=dev)


def max_cross_overlap(basis_set: BasisSet) -> float:
    """Largest |<v_i^x|v_j^y>| over distinct bases x != y of a set."""
    worst = 0.0
    for x in range(basis_set.c):
        for y in range(x + 1, basis_set.c):
            worst = max(worst, math.sqrt(_max_transition_prob(basis_set.bases[x], basis_set.bases[y])))
    return worst


def random_basis(d: int, rng: RandomStream, label: str = "random") -> Basis:
    """Haar-random orthonormal basis (QR of a complex Gaussian matrix)."""
    if d < 2:
        raise InvalidParameter("dimension must be >= 2")
    u1 = np.array(rng.uniforms(d * d)).reshape(d, d)
    u2 = np.array(rng.uniforms(d * d)).reshape(d, d)
    u1 = np.clip(u1, 1e-300, None)
    gauss = np.sqrt(-2.0 * np.log(u1)) * np.exp(2j * np.pi * u2)
    q, r = np.linalg.qr(gauss)
    q = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
    return Basis(label, q)


def _is_odd_prime(n: int) -> bool:
    if n < 3 or n % 2 == 0:
        return False
    return all(n % k for k in range(3, int(math.isqrt(n)) + 1, 2))


def save_basis_set(basis_set: BasisSet, path) -> None:
    """Write a basis set to the JSON interchange format."""
    doc = {
        "d": basis_set.d,
        "c": basis_set.c,
        "bases": [
            {
                "label": b.label,
                "vectors": [
                    [[float(a.real), float(a.imag)] for a in b.matrix[:, j]]
                    for j in range(basis_set.d)
                ],
            }
            for b in basis_set.bases
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_basis_set(path) -> BasisSet:
    """Read a basis set from the JSON interchange format.

    All BasisSet invariants (orthonormality, no shared states, c >= 2)
    are enforced; violations raise InvalidParameter.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidParameter(f"not a valid basis-set file: {exc}") from exc
    try:
        d, c, entries = int(doc["d"]), int(doc["c"]), doc["bases"]
    except (KeyError, TypeError) as exc:
        raise InvalidParameter(f"basis-set file missing field: {exc}") from exc
    if len(entries) != c:
        raise InvalidParameter(f"file declares c = {c} but lists {len(entries)} bases")
    members = []
    for entry in entries:
        vectors = entry.get("vectors")
        if vectors is None or len(vectors) != d:
            raise InvalidParameter(f"basis {entry.get('label')!r} must list {d} vectors")
        try:
            matrix = np.array(
                [[complex(re, im) for re, im in vec] for vec in vectors], dtype=np.complex128
            ).T
        except (TypeError, ValueError) as exc:
            raise InvalidParameter(f"malformed amplitude pair: {exc}") from exc
        if matrix.shape != (d, d):
            raise InvalidParameter(f"basis {entry.get('label')!r} has wrong vector length")
        members.append(Basis(str(entry.get("label", "?")), matrix))
    return BasisSet(members)
