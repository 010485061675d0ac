"""Shared golden fixtures.

The two reference piles below were worked out independently (small one
by hand, large one cross-checked by three different computations), so
tests can pin exact content instead of trusting the code under test.
"""

# p=2, 24 grains
GOLDEN_P2_N24_SLOPES = (2, 1, 2, 1, 2)
GOLDEN_P2_N24_SHOT = (8, 1, 2)
GOLDEN_P2_N24_HEIGHTS = (8, 6, 5, 3, 2)

# p=4, 2000 grains: waves from column 20, one interior zero at column 24
GOLDEN_P4_N2000_SLOPES = (
    4, 0, 4, 1, 3, 2, 4, 1, 1, 3,
    4, 3, 4, 2, 0, 1, 4, 2, 2, 1,
    4, 3, 2, 1, 0, 4, 3, 2, 1, 4,
    3, 2, 1, 4, 3, 2, 1, 4, 3, 2,
    1,
)
GOLDEN_P4_N2000_NSTRICT = 20
GOLDEN_P4_N2000_ZERO_AT = 24
