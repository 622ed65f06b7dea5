"""Finite strata lattices behind support identification.

The group norm partitions coefficient space into :math:`2^G` primal
strata, one per on/off pattern of the groups, and partitions the dual
unit ball into :math:`2^G` dual strata, one per pattern of "certificate
norm on the unit sphere" versus "strictly inside the ball". The transfer
map pairs Nonzero with Sphere and Zero with Interior, componentwise. It
is a bijection between the two lattices and reverses their partial
orders; :func:`verify_lattice` checks these facts exhaustively, which is
what makes the identification theorems mechanically checkable here
rather than trusted.

Patterns are immutable tuples of enum marks; all functions are pure.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ContractViolation, DualInfeasible
from .support import support_of

__all__ = [
    "PrimalMark",
    "DualMark",
    "PrimalStratum",
    "DualStratum",
    "primal_stratum_of",
    "dual_stratum_of",
    "transfer_JR",
    "transfer_JRstar",
    "stratum_leq",
    "verify_lattice",
    "LatticeVerdict",
]

#: Exhaustive verification enumerates 2^G strata.
MAX_LATTICE_GROUPS = 16


class PrimalMark(Enum):
    ZERO = "Zero"
    NONZERO = "Nonzero"


class DualMark(Enum):
    INTERIOR = "Interior"
    SPHERE = "Sphere"


def _validated_pattern(pattern, mark_type):
    pat = tuple(pattern)
    if len(pat) < 1:
        raise ContractViolation("pattern must be non-empty")
    if any(not isinstance(p, mark_type) for p in pat):
        raise ContractViolation(
            f"pattern entries must be {mark_type.__name__} marks"
        )
    return pat


@dataclass(frozen=True)
class PrimalStratum:
    """On/off pattern of the groups: one mark in {Zero, Nonzero} each."""

    pattern: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "pattern", _validated_pattern(self.pattern, PrimalMark)
        )

    @classmethod
    def from_support(cls, support, n_groups):
        """Stratum whose Nonzero positions are exactly `support`."""
        support = set(int(g) for g in support)
        if support and (min(support) < 0 or max(support) >= n_groups):
            raise ContractViolation(
                f"support {sorted(support)} out of range for G={n_groups}"
            )
        return cls(tuple(
            PrimalMark.NONZERO if g in support else PrimalMark.ZERO
            for g in range(n_groups)
        ))

    @property
    def n_groups(self):
        return len(self.pattern)

    def nonzero_set(self):
        return frozenset(
            g for g, p in enumerate(self.pattern) if p is PrimalMark.NONZERO
        )

    def as_mask(self):
        """Bitmask with bit g set iff group g is Nonzero."""
        mask = 0
        for g, p in enumerate(self.pattern):
            if p is PrimalMark.NONZERO:
                mask |= 1 << g
        return mask

    @classmethod
    def from_mask(cls, mask, n_groups):
        return cls(tuple(
            PrimalMark.NONZERO if (mask >> g) & 1 else PrimalMark.ZERO
            for g in range(n_groups)
        ))


@dataclass(frozen=True)
class DualStratum:
    """Certificate pattern: one mark in {Interior, Sphere} per group."""

    pattern: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "pattern", _validated_pattern(self.pattern, DualMark)
        )

    @property
    def n_groups(self):
        return len(self.pattern)

    def sphere_set(self):
        return frozenset(
            g for g, p in enumerate(self.pattern) if p is DualMark.SPHERE
        )

    def as_mask(self):
        """Bitmask with bit g set iff group g is on the Sphere."""
        mask = 0
        for g, p in enumerate(self.pattern):
            if p is DualMark.SPHERE:
                mask |= 1 << g
        return mask

    @classmethod
    def from_mask(cls, mask, n_groups):
        return cls(tuple(
            DualMark.SPHERE if (mask >> g) & 1 else DualMark.INTERIOR
            for g in range(n_groups)
        ))


def primal_stratum_of(coeffs):
    """Stratum containing a coefficient matrix (exact-zero convention)."""
    return PrimalStratum.from_support(support_of(coeffs), coeffs.n_groups)


def dual_stratum_of(norms, eps_rel=1e-4):
    """Stratum of a scaled certificate-norm vector.

    Parameters
    ----------
    norms : (G,) array_like
        Nonnegative certificate norms, already scaled by lambda so the
        dual domain is the product of unit balls.
    eps_rel : float
        Norms within `eps_rel` of 1 count as on the sphere.

    Raises
    ------
    DualInfeasible
        If any norm exceeds ``1 + eps_rel``; certificates only leave the
        ball away from solutions, so this flags a bad input point.
    """
    norms = np.asarray(norms, dtype=np.float64)
    eps_rel = float(eps_rel)
    if norms.ndim != 1 or norms.size < 1:
        raise ContractViolation("norms must be a non-empty vector")
    if not np.isfinite(norms).all() or norms.min() < 0.0:
        raise ContractViolation("norms must be finite and nonnegative")
    if float(norms.max()) > 1.0 + eps_rel:
        raise DualInfeasible(
            f"certificate norm {float(norms.max())!r} exceeds the dual "
            f"bound 1 beyond eps_rel={eps_rel!r}"
        )
    return DualStratum(tuple(
        DualMark.SPHERE if v >= 1.0 - eps_rel else DualMark.INTERIOR
        for v in norms
    ))


def transfer_JR(stratum):
    """Primal-to-dual transfer: Nonzero -> Sphere, Zero -> Interior."""
    if not isinstance(stratum, PrimalStratum):
        raise ContractViolation("transfer_JR expects a PrimalStratum")
    return DualStratum(tuple(
        DualMark.SPHERE if p is PrimalMark.NONZERO else DualMark.INTERIOR
        for p in stratum.pattern
    ))


def transfer_JRstar(stratum):
    """Dual-to-primal transfer: Sphere -> Nonzero, Interior -> Zero."""
    if not isinstance(stratum, DualStratum):
        raise ContractViolation("transfer_JRstar expects a DualStratum")
    return PrimalStratum(tuple(
        PrimalMark.NONZERO if p is DualMark.SPHERE else PrimalMark.ZERO
        for p in stratum.pattern
    ))


def stratum_leq(a, b):
    """Partial order: a precedes b iff a lies in the closure of b.

    Primal side: the Nonzero set of `a` is contained in that of `b`
    (zero coordinates are limits of nonzero ones, not conversely).
    Dual side: the Sphere set of `a` *contains* that of `b` (the sphere
    is closed, while interior points are limits of nothing outside the
    ball), so the dual order runs opposite to naive set inclusion.
    """
    if isinstance(a, PrimalStratum) and isinstance(b, PrimalStratum):
        if a.n_groups != b.n_groups:
            raise ContractViolation("strata must share G")
        return a.nonzero_set() <= b.nonzero_set()
    if isinstance(a, DualStratum) and isinstance(b, DualStratum):
        if a.n_groups != b.n_groups:
            raise ContractViolation("strata must share G")
        return a.sphere_set() >= b.sphere_set()
    raise ContractViolation(
        "stratum_leq compares two strata from the same side of the lattice"
    )


@dataclass(frozen=True)
class LatticeVerdict:
    """Result of exhaustive lattice verification.

    On failure, `check` names the violated property and `witness` holds
    the offending stratum or pair of strata.
    """

    passed: bool
    check: str | None = None
    witness: tuple | None = None

    def __bool__(self):
        return self.passed


def _leq_mask_primal(a, b):
    # subset test on Nonzero bitmasks
    return (a & ~b) == 0


def _leq_mask_dual(a, b):
    # superset test on Sphere bitmasks
    return (b & ~a) == 0


def verify_lattice(n_groups, transfer=transfer_JR, inverse=transfer_JRstar):
    """Exhaustively verify the two-lattice correspondence for `n_groups`.

    Enumerates all ``2^G`` primal and dual strata and checks that
    `transfer` is a bijection onto the dual strata, that `inverse`
    undoes it in both compositions, and that the pair reverses the
    partial order: a <= b on the primal side iff transfer(b) <=
    transfer(a) on the dual side, over all pairs. For G <= 8 the
    partial-order axioms (reflexivity, antisymmetry, transitivity) are
    also checked exhaustively on both sides, and `stratum_leq` is
    cross-checked against the vectorized order predicate.

    Parameters
    ----------
    n_groups : int
        1 <= G <= 16.
    transfer, inverse : callable
        Injectable so a corrupted transfer is detectable; defaults are
        the canonical maps.

    Returns
    -------
    LatticeVerdict
    """
    G = int(n_groups)
    if not (1 <= G <= MAX_LATTICE_GROUPS):
        raise ContractViolation(
            f"n_groups must lie in [1, {MAX_LATTICE_GROUPS}], got {n_groups!r}"
        )
    size = 1 << G
    primal = [PrimalStratum.from_mask(m, G) for m in range(size)]
    duals = [DualStratum.from_mask(m, G) for m in range(size)]

    images = [transfer(s) for s in primal]
    img = np.fromiter((d.as_mask() for d in images), dtype=np.int64, count=size)

    # bijection: every dual stratum hit exactly once
    order = np.argsort(img, kind="stable")
    sorted_img = img[order]
    dup = np.flatnonzero(sorted_img[1:] == sorted_img[:-1])
    if dup.size:
        i, j = int(order[dup[0]]), int(order[dup[0] + 1])
        return LatticeVerdict(False, "bijection", (primal[i], primal[j]))
    if sorted_img[0] != 0 or sorted_img[-1] != size - 1:
        missing = int(np.setdiff1d(np.arange(size), sorted_img)[0])
        return LatticeVerdict(False, "bijection", (duals[missing],))

    for s, d in zip(primal, images):
        if inverse(d) != s:
            return LatticeVerdict(False, "inverse", (s, d))
    for d in duals:
        if transfer(inverse(d)) != d:
            return LatticeVerdict(False, "inverse", (d,))

    masks = np.arange(size, dtype=np.int64)
    # order reversal: a <= b iff transfer(b) <= transfer(a), all pairs
    chunk = max(1, min(size, (1 << 22) // size))
    for lo in range(0, size, chunk):
        A = masks[lo:lo + chunk, None]
        B = masks[None, :]
        lhs = _leq_mask_primal(A, B)
        rhs = _leq_mask_dual(img[None, :], img[lo:lo + chunk, None])
        bad = lhs != rhs
        if bad.any():
            i, j = np.argwhere(bad)[0]
            return LatticeVerdict(
                False, "order-reversal", (primal[lo + int(i)], primal[int(j)])
            )

    if G <= 8:
        for name, leq, strata in (
            ("primal", _leq_mask_primal, primal),
            ("dual", _leq_mask_dual, duals),
        ):
            L = leq(masks[:, None], masks[None, :])
            if not L.diagonal().all():
                i = int(np.flatnonzero(~L.diagonal())[0])
                return LatticeVerdict(
                    False, f"{name}-reflexivity", (strata[i],)
                )
            both = L & L.T
            np.fill_diagonal(both, False)
            if both.any():
                i, j = np.argwhere(both)[0]
                return LatticeVerdict(
                    False, f"{name}-antisymmetry",
                    (strata[int(i)], strata[int(j)]),
                )
            Li = L.astype(np.int32)
            broken = ((Li @ Li) > 0) & ~L
            if broken.any():
                i, j = np.argwhere(broken)[0]
                return LatticeVerdict(
                    False, f"{name}-transitivity",
                    (strata[int(i)], strata[int(j)]),
                )
        # spot-check the public comparator against the mask predicate
        rng = np.random.default_rng(G)
        n_pairs = size * size
        take = min(n_pairs, 512)
        flat = rng.choice(n_pairs, size=take, replace=False)
        for f in flat:
            i, j = int(f // size), int(f % size)
            if stratum_leq(primal[i], primal[j]) != bool(
                _leq_mask_primal(masks[i], masks[j])
            ):
                return LatticeVerdict(
                    False, "primal-comparator", (primal[i], primal[j])
                )
            if stratum_leq(duals[i], duals[j]) != bool(
                _leq_mask_dual(masks[i], masks[j])
            ):
                return LatticeVerdict(
                    False, "dual-comparator", (duals[i], duals[j])
                )

    return LatticeVerdict(True)
