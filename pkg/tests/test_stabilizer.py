"""Stabilization engines against slow model-level oracles."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import (
    GOLDEN_P2_N24_SHOT,
    GOLDEN_P2_N24_SLOPES,
    GOLDEN_P4_N2000_SLOPES,
)
from kspm.errors import CapacityError
from kspm.model import SlopeConfig, fire, fireable, grain_count, is_stable
from kspm.stabilizer import (
    IncrementalStabilizer,
    density_column,
    global_density_column,
    holes,
    leftmost_avalanche,
    stabilize,
    stabilize_incremental,
    trace_leftmost,
)


def naive_leftmost(p, n):
    """Reference stabilizer built only on the value-semantic fire op."""
    c = SlopeConfig((n,)) if n else SlopeConfig(())
    shot = {}
    while not is_stable(p, c):
        i = min(j for j in range(c.support) if fireable(p, c, j))
        shot[i] = shot.get(i, 0) + 1
        c = fire(p, c, i)
    width = max(shot) + 1 if shot else 0
    return c, tuple(shot.get(i, 0) for i in range(width))


def test_golden_small():
    fp = stabilize(2, 24)
    assert fp.slopes.slopes == GOLDEN_P2_N24_SLOPES
    assert fp.shot == GOLDEN_P2_N24_SHOT
    assert fp.strategy == "leftmost"


def test_golden_large():
    fp = stabilize(4, 2000)
    assert fp.slopes.slopes == GOLDEN_P4_N2000_SLOPES


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_engine_matches_naive_oracle(p):
    for n in range(0, 41):
        fp = stabilize(p, n)
        slopes, shot = naive_leftmost(p, n)
        assert fp.slopes == slopes, (p, n)
        assert fp.shot == shot, (p, n)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_small_piles_need_no_fire(p):
    for n in range(0, p + 1):
        fp = stabilize(p, n)
        assert fp.slopes.slopes == ((n,) if n else ())
        assert fp.shot == ()


def test_incremental_equals_direct_along_the_way():
    inc = IncrementalStabilizer(2, expect=60)
    for n in range(1, 61):
        inc.advance()
        snap = inc.snapshot()
        direct = stabilize(2, n)
        assert snap.slopes == direct.slopes
        assert snap.shot == direct.shot
        assert snap.n_grains == n


@pytest.mark.parametrize("p,seed", [(1, 0), (2, 1), (3, 7), (4, 42)])
def test_random_strategy_reaches_same_fixed_point(p, seed):
    for n in (0, 1, 17, 100, 257):
        a = stabilize(p, n, "leftmost")
        b = stabilize(p, n, "random", seed=seed)
        assert a.slopes == b.slopes
        assert a.shot == b.shot
        assert b.strategy == f"random(mt19937:{seed})"


def test_random_strategy_is_reproducible():
    a = stabilize(3, 500, "random", seed=9)
    b = stabilize(3, 500, "random", seed=9)
    assert a == b


def test_avalanche_replay_is_leftmost():
    """Each recorded avalanche must replay move for move under the fire op,
    always choosing the least fireable column, and land on the next pile."""
    fp, avs = stabilize_incremental(2, 30)
    c = SlopeConfig(())
    for k, av in enumerate(avs, start=1):
        c = SlopeConfig((c[0] + 1,) + c.slopes[1:]) if c.slopes else SlopeConfig((1,))
        for i in av.fired:
            least = min(j for j in range(c.support) if fireable(2, c, j))
            assert i == least
            c = fire(2, c, i)
        assert is_stable(2, c)
        assert c == stabilize(2, k).slopes
    assert fp.slopes == c


def test_avalanche_records():
    _, avs = stabilize_incremental(2, 24)
    assert avs[0].fired == ()  # one grain sits still
    assert avs[0].k == 1
    nonempty = [a for a in avs if a.fired]
    assert nonempty, "some avalanche must fire by 24 grains"
    for a in nonempty:
        assert a.fired[0] == 0
        assert a.max_fired == max(a.fired)
        assert len(set(a.fired)) == len(a.fired)


def test_leftmost_avalanche_from_fixed_point():
    prev = stabilize(2, 23)
    av = leftmost_avalanche(prev)
    assert av.k == 24
    _, avs = stabilize_incremental(2, 24)
    assert av.fired == avs[-1].fired


def test_leftmost_avalanche_trivial_cases():
    # a pile holding exactly p grains is one grain below the threshold,
    # so the next grain fires column 0 exactly once
    av = leftmost_avalanche(stabilize(3, 3))
    assert av.fired == (0,)
    assert av.density_column == 0
    assert av.max_fired == 0
    # an empty avalanche has no maximum and density 0
    quiet = leftmost_avalanche(stabilize(3, 1))
    assert quiet.fired == ()
    assert quiet.max_fired is None
    assert quiet.density_column == 0


def test_density_column_cases():
    assert density_column(()) == 0
    assert density_column((0, 1, 2)) == 0
    assert density_column((2, 0, 1)) == 0
    # start of the trailing contiguous block, per the interval definition
    assert density_column((3, 4, 5)) == 3
    assert density_column((1, 4, 5, 6)) == 4
    assert density_column((0, 1, 3)) == 3
    assert density_column((7,)) == 7


@given(st.sets(st.integers(min_value=0, max_value=12), max_size=8))
def test_density_column_brute_force(fired):
    """First l whose upward closure within fired is exactly [l, max]."""
    got = density_column(tuple(fired))
    if not fired:
        assert got == 0
    else:
        top = max(fired)
        expect = next(
            l
            for l in range(top + 1)
            if {i for i in fired if i >= l} == set(range(l, top + 1))
        )
        assert got == expect


def test_holes():
    assert holes(()) == ()
    assert holes((0, 1, 2)) == ()
    assert holes((1, 4, 5, 6)) == (0, 3)
    assert holes((2,)) == (1,)


def test_global_density_column_tracks_avalanches():
    _, avs = stabilize_incremental(2, 200)
    expect = max(a.density_column for a in avs)
    assert global_density_column(2, 200) == expect
    assert global_density_column(2, 100) <= expect


def test_track_density_flag():
    inc = IncrementalStabilizer(3, expect=150, track_density=True)
    inc.advance_to(150)
    _, avs = stabilize_incremental(3, 150)
    assert inc.density_max == max(a.density_column for a in avs)


@pytest.mark.parametrize("p,n", [(1, 77), (2, 24), (3, 260), (5, 1001)])
def test_shot_balance_at_every_column(p, n):
    """Slopes must satisfy the mass balance against the shot vector,
    with N sitting p virtual columns to the left of the origin."""
    fp = stabilize(p, n)
    w = fp.slopes.support
    for i in range(w + p + 1):
        back = n if i == 0 else (0 if i < p else fp.shot_at(i - p))
        b = back - (p + 1) * fp.shot_at(i) + p * fp.shot_at(i + 1)
        assert b == fp.slopes[i], (p, n, i)


@pytest.mark.parametrize("p,n", [(2, 24), (3, 100), (4, 2000), (1, 50)])
def test_column_zero_shot_bounded(p, n):
    fp = stabilize(p, n)
    assert fp.shot_at(0) * p <= n


@pytest.mark.parametrize("p,n", [(1, 64), (2, 300), (4, 999)])
def test_grain_conservation(p, n):
    assert grain_count(stabilize(p, n).slopes) == n


def test_stabilize_argument_validation():
    with pytest.raises(ValueError):
        stabilize(0, 5)
    with pytest.raises(ValueError):
        stabilize(2, -1)
    with pytest.raises(ValueError):
        stabilize(2, 5, "sideways")
    with pytest.raises(CapacityError):
        stabilize(2, 2**62 + 1)


def test_trace_leftmost_counts_firings():
    seen = []
    fp = trace_leftmost(2, 24, seen.append)
    assert len(seen) == sum(fp.shot)
    assert fp.slopes.slopes == GOLDEN_P2_N24_SLOPES


def test_incremental_capacity_growth():
    # deliberately undersized: must grow instead of crashing
    inc = IncrementalStabilizer(2, expect=0)
    inc.advance_to(500)
    assert inc.snapshot().slopes == stabilize(2, 500).slopes


@settings(max_examples=25)
@given(st.integers(min_value=1, max_value=4), st.integers(min_value=0, max_value=120))
def test_fixed_point_is_stable(p, n):
    fp = stabilize(p, n)
    assert is_stable(p, fp.slopes)
    assert grain_count(fp.slopes) == n
