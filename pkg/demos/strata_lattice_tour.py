"""
The two lattices behind support identification
==============================================

Supports live in a lattice of primal strata (each group Zero or
Nonzero); dual certificates live in a mirror lattice (each group
strictly Interior or on the Sphere). The transfer map swaps the two,
reversing order. Identification statements are one-line consequences
of this structure, so the library ships it as a first-class object.
"""

from sparsemkl.strata import (
    DualStratum,
    PrimalStratum,
    stratum_leq,
    transfer_JR,
    transfer_JRstar,
    verify_lattice,
)


def marks(stratum):
    # Z/N for primal strata, I/S for dual ones
    return "".join(p.name[0] for p in stratum.pattern)


G = 3

# ------------------------------------------------------------------
# Enumerate the primal side. 2^3 = 8 strata, one per support pattern.

print("primal strata for G=3:")
for mask in range(2 ** G):
    stratum = PrimalStratum.from_mask(mask, G)
    print(f"  {marks(stratum)}   support {sorted(stratum.nonzero_set())}")

# ------------------------------------------------------------------
# Transfer and back.
#
# Nonzero groups map to Sphere constraints and vice versa; applying
# the two transfer maps in sequence is the identity.

s = PrimalStratum.from_support({0, 2}, G)
d = transfer_JR(s)
back = transfer_JRstar(d)
print()
print(f"primal {marks(s)}  ->  dual {marks(d)}  ->  primal {marks(back)}")
assert back == s

# ------------------------------------------------------------------
# Order reversal.
#
# Fewer active groups = smaller primal stratum; its transfer is the
# LARGER dual stratum. This flip is what turns the dual certificate
# band into a two-sided bound on iterate supports.

small = PrimalStratum.from_support({0}, G)
large = PrimalStratum.from_support({0, 2}, G)
print()
print(f"{marks(small)} <= {marks(large)} primally: "
      f"{stratum_leq(small, large)}")
print(f"{marks(transfer_JR(large))} <= {marks(transfer_JR(small))} "
      f"dually: {stratum_leq(transfer_JR(large), transfer_JR(small))}")

# The sandwich, restated: with s_bar the solution stratum and d_bar
# the dual stratum of the certificate, every late-iterate stratum s_n
# satisfies s_bar <= s_n <= transfer(d_bar). The support module's
# sandwich_check verifies exactly this chain on solver traces.

d_bar = DualStratum.from_mask(0b101, G)
s_n = PrimalStratum.from_support({0, 2}, G)
s_bar = PrimalStratum.from_support({0}, G)
print()
print(f"s_bar <= s_n:             {stratum_leq(s_bar, s_n)}")
print(f"s_n <= transfer(d_bar):   {stratum_leq(s_n, transfer_JRstar(d_bar))}")

# ------------------------------------------------------------------
# Certify the whole structure.
#
# verify_lattice exhaustively checks bijectivity, inversion, order
# reversal, and the partial-order axioms for one group count. Cheap
# insurance; it runs in milliseconds for any G up to the cap.

for g in (1, 2, 3, 4, 5):
    verdict = verify_lattice(g)
    print(f"lattice G={g}: {'pass' if verdict.passed else 'fail'} "
          f"({2 ** g} strata per side)")
