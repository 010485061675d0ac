"""Exact dynamics of the shot vector.

Write ``a_i`` for the number of times column ``i`` fires while ``n``
grains stabilize, with the virtual convention ``a_{-p} = n`` and
``a_j = 0`` for ``-p < j < 0``.  Mass balance at column ``i`` gives

    b_i = a_{i-p} - (p + 1) * a_i + p * a_{i+1}

so a sliding window of ``p + 1`` consecutive shot values advances one
column at a time, driven by the slope it passes over.  Everything here
is exact integer arithmetic; divisibility failures raise
:class:`NonIntegral` because they prove the inputs were not genuine
fixed-point data.

Reducing mod ``p`` nearly determines the slope from the window alone:
the residue of ``a_{i-p} - a_i`` equals ``b_i mod p``, which pins the
slope except when the residue is 0, where it may be either 0 or ``p``.

The averaging view replaces the window by its ``p`` consecutive
differences.  The slope again drives a one-step shift whose new entry
is the old mean plus ``b_i / p``, and the min/max envelope of that
difference vector contracts, which is what eventually freezes the
pattern into waves.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isqrt

from .errors import Divergence, NonIntegral
from .model import SlopeConfig, check_grains, check_p


@dataclass(frozen=True)
class SlopeDetermination:
    """Outcome of reading a slope off the window residue.

    ``value`` is the slope when determined, and ``None`` when the
    residue is 0, in which case the slope is either 0 or ``p``.
    """

    value: int | None

    @property
    def is_determined(self) -> bool:
        return self.value is not None

    @classmethod
    def determined(cls, b: int) -> "SlopeDetermination":
        return cls(b)

    @classmethod
    def ambiguous(cls) -> "SlopeDetermination":
        return cls(None)


def slope_from_shots(p: int, a_back: int, a_here: int, a_next: int) -> int:
    """Slope at a column from the three shot values that see it.

    ``a_back`` is the shot ``p`` columns back (virtual ``n`` at ``i = 0``),
    ``a_here`` the shot at the column, ``a_next`` the shot one to the right.
    """
    check_p(p)
    return a_back - (p + 1) * a_here + p * a_next


def next_shot(p: int, a_back: int, a_here: int, b: int) -> int:
    """Invert the balance: shot one column to the right, exactly.

    Raises :class:`NonIntegral` when ``p`` does not divide the numerator,
    which cannot happen for consistent fixed-point data.
    """
    check_p(p)
    num = -a_back + (p + 1) * a_here + b
    q, r = divmod(num, p)
    if r:
        raise NonIntegral(
            f"(-{a_back} + {p + 1}*{a_here} + {b}) is not divisible by {p}"
        )
    return q


def determine_slope(p: int, a_back: int, a_here: int) -> SlopeDetermination:
    """Read the slope mod ``p`` from the two window ends."""
    check_p(p)
    r = (a_back - a_here) % p
    if r == 0:
        return SlopeDetermination.ambiguous()
    return SlopeDetermination.determined(r)


def initial_window(p: int, n: int, a0: int) -> tuple[int, ...]:
    """Window at column 0: the virtual shots followed by ``a_0``."""
    check_p(p)
    return (n,) + (0,) * (p - 1) + (a0,)


def x_step(p: int, window: tuple[int, ...], b: int) -> tuple[int, ...]:
    """Advance the shot window one column under slope ``b``."""
    if len(window) != p + 1:
        raise ValueError(f"window must have {p + 1} entries")
    return window[1:] + (next_shot(p, window[0], window[-1], b),)


def to_averaging(window) -> tuple[int, ...]:
    """Consecutive differences of a shot window (one entry shorter)."""
    return tuple(window[i + 1] - window[i] for i in range(len(window) - 1))


def y_step(p: int, y: tuple[int, ...], b: int) -> tuple[int, ...]:
    """Advance the difference vector one column under slope ``b``.

    The new entry is ``(sum(y) + b) / p``; non-divisibility raises
    :class:`NonIntegral`.
    """
    check_p(p)
    if len(y) != p:
        raise ValueError(f"difference vector must have {p} entries")
    q, r = divmod(sum(y) + b, p)
    if r:
        raise NonIntegral(f"(sum {sum(y)} + {b}) is not divisible by {p}")
    return y[1:] + (q,)


def initial_averaging(p: int, n: int, a0: int) -> tuple[int, ...]:
    """Difference vector at column 0, ``(-n, 0, ..., 0, a0)`` collapsed for p = 1."""
    return to_averaging(initial_window(p, n, a0))


def determine_slope_from_mean(p: int, y) -> SlopeDetermination:
    """Read the slope mod ``p`` from a difference vector's sum."""
    check_p(p)
    r = (-sum(y)) % p
    if r == 0:
        return SlopeDetermination.ambiguous()
    return SlopeDetermination.determined(r)


def uniform_index(ys) -> int:
    """Index of the first constant vector in an iterable of vectors."""
    for i, y in enumerate(ys):
        if min(y) == max(y):
            return i
    raise ValueError("no uniform vector in the given trajectory")


def iter_windows(p: int, slopes, a0: int, n: int):
    """Yield ``(i, window, b_i)`` along the true trajectory of a fixed point.

    ``slopes`` are the stabilized slopes for ``n`` grains and ``a0`` the
    shot count of column 0.  Iteration stops after the first all-zero
    window past position ``p``, which certifies nothing fires further out.
    """
    check_p(p)
    check_grains(n)
    seq = tuple(slopes)
    w = len(seq)
    while w and seq[w - 1] == 0:
        w -= 1
    window = initial_window(p, n, a0)
    i = 0
    while True:
        b = seq[i] if i < w else 0
        yield i, window, b
        if i > p and not any(window):
            return
        window = x_step(p, window, b)
        i += 1
        if i > w + 2 * p + 2:
            raise NonIntegral("trajectory failed to close; inputs inconsistent")


@dataclass(frozen=True)
class TrajectoryReport:
    """Summary of one exact window trajectory with optional invariant checks.

    ``uniform_index`` is the first column whose difference vector is
    constant and ``uniform_value`` that constant.  ``ambiguous_count``
    counts positions where the residue alone does not pin the slope.
    ``violations`` is empty when all checked invariants held.
    """

    p: int
    n_grains: int
    steps: int
    uniform_index: int
    uniform_value: int
    ambiguous_count: int
    spread0: int
    checked: bool
    violations: tuple[str, ...]


def trajectory_report(p, slopes, a0, n, check=True) -> TrajectoryReport:
    """Walk the exact window trajectory of a fixed point and audit it.

    With ``check=True`` this verifies, at every step: the two slope
    reads (window residue and difference-vector residue) agree and match
    the true slope; advancing differences commutes with differencing the
    advanced window; and at nonconstant difference vectors the min/max
    envelope never widens, the new entry lands inside the old open/closed
    envelope, and the envelope width strictly shrinks within ``p`` steps.
    """
    check_p(p)
    check_grains(n)
    seq = tuple(slopes)
    w = len(seq)
    while w and seq[w - 1] == 0:
        w -= 1

    window = initial_window(p, n, a0)
    y = to_averaging(window)
    violations: list[str] = []
    spreads: list[int] = []
    nonuniform: list[int] = []
    uniform_at = -1
    uniform_val = 0
    ambiguous = 0
    spread0 = max(y) - min(y) if p > 1 else 0

    i = 0
    while True:
        closed = i > p and not any(window)
        b = seq[i] if i < w else 0
        mn, mx = min(y), max(y)
        spreads.append(mx - mn)
        if mn == mx:
            if uniform_at < 0:
                uniform_at = i
                uniform_val = mn
        elif check:
            nonuniform.append(i)
        if not closed and (window[0] - window[-1]) % p == 0:
            ambiguous += 1

        if check:
            det = determine_slope(p, window[0], window[-1])
            if det != determine_slope_from_mean(p, y):
                violations.append(f"i={i}: window and mean determinations differ")
            if det.is_determined:
                if det.value != b:
                    violations.append(
                        f"i={i}: determined slope {det.value} but true slope {b}"
                    )
            elif b not in (0, p):
                violations.append(f"i={i}: ambiguous residue but true slope {b}")
        if closed:
            break

        window2 = x_step(p, window, b)
        y2 = y_step(p, y, b)
        if check:
            if to_averaging(window2) != y2:
                violations.append(f"i={i}: averaging step does not commute")
            if mn != mx:
                new = y2[-1]
                if not (mn < new <= mx):
                    violations.append(
                        f"i={i}: new entry {new} outside envelope ({mn}, {mx}]"
                    )
                if min(y2) < mn or max(y2) > mx:
                    violations.append(f"i={i}: envelope widened")
        window, y = window2, y2
        i += 1
        if i > w + 2 * p + 2:
            raise NonIntegral("trajectory failed to close; inputs inconsistent")

    if check:
        last = len(spreads) - 1
        for j in nonuniform:
            lookahead = spreads[j + 1 : min(j + p, last) + 1]
            if lookahead and min(lookahead) >= spreads[j]:
                violations.append(
                    f"i={j}: envelope width did not shrink within {p} steps"
                )
    if uniform_at < 0:
        # the final all-zero window always yields a constant difference vector
        uniform_at = i
        uniform_val = 0

    return TrajectoryReport(
        p=p,
        n_grains=n,
        steps=i,
        uniform_index=uniform_at,
        uniform_value=uniform_val,
        ambiguous_count=ambiguous,
        spread0=spread0,
        checked=check,
        violations=tuple(violations),
    )


class GroundTruthResolver:
    """Resolve residue-0 positions by looking the slope up in known data."""

    authoritative = True

    def __init__(self, slopes):
        self._slopes = tuple(slopes)

    def __call__(self, i: int) -> int:
        return self._slopes[i] if i < len(self._slopes) else 0


class AssumeZeroResolver:
    """Resolve every residue-0 position to slope 0.

    A guess, not knowledge: reconstructions using it are marked
    non-authoritative.
    """

    authoritative = False

    def __call__(self, i: int) -> int:
        return 0


@dataclass(frozen=True)
class Reconstruction:
    """A fixed point rebuilt from ``(p, n, a0)`` plus an ambiguity resolver.

    ``ambiguous_positions`` lists every column where the resolver was
    consulted.  ``authoritative`` is False when the resolver guessed.
    """

    p: int
    n_grains: int
    slopes: SlopeConfig
    shot: tuple[int, ...]
    ambiguous_positions: tuple[int, ...]
    authoritative: bool
    steps: int


def reconstruct_fixed_point(p: int, n: int, a0: int, resolver) -> Reconstruction:
    """Rebuild slopes and shot vector from the initial window alone.

    Walks the window recurrence, reading each slope from the residue and
    asking ``resolver(i)`` (which must return 0 or ``p``) whenever the
    residue leaves it open.  Stops at the first all-zero window past
    position ``p``.  Raises :class:`Divergence` if the window fails to
    close within the provable support bound, and :class:`NonIntegral` on
    a divisibility failure; both mean ``(n, a0)`` plus the resolutions do
    not describe a real fixed point.
    """
    check_p(p)
    check_grains(n)
    if not isinstance(a0, int) or isinstance(a0, bool) or a0 < 0:
        raise ValueError(f"a0 must be a non-negative integer, got {a0!r}")
    bound = (p + 1) * (isqrt(n) + 1) + p + 2
    window = initial_window(p, n, a0)
    slopes: list[int] = []
    shots: list[int] = [a0]
    consulted: list[int] = []
    i = 0
    while not (i > p and not any(window)):
        r = (window[0] - window[-1]) % p
        if r == 0:
            consulted.append(i)
            b = resolver(i)
            if b not in (0, p):
                raise ValueError(f"resolver returned {b!r}; must be 0 or {p}")
        else:
            b = r
        window = x_step(p, window, b)
        slopes.append(b)
        shots.append(window[-1])
        i += 1
        if i > bound:
            raise Divergence(f"no all-zero window within the support bound {bound}")
    while shots and shots[-1] == 0:
        shots.pop()
    return Reconstruction(
        p=p,
        n_grains=n,
        slopes=SlopeConfig(slopes),
        shot=tuple(shots),
        ambiguous_positions=tuple(consulted),
        authoritative=bool(getattr(resolver, "authoritative", False)),
        steps=i,
    )


@dataclass(frozen=True)
class WaveUnfoldReport:
    """Result of checking a slope tail against the wave automaton."""

    accepted: bool
    mismatch_position: int | None
    waves: int
    zeros: int
    start_value: int
    end_value: int


def wave_unfold(p: int, alpha: int, tail) -> WaveUnfoldReport:
    """Run the uniform-state automaton over a slope tail.

    From a constant difference vector of value ``alpha``, slope 0 keeps
    the constant and a full descending run ``p, p-1, ..., 1`` raises it
    by one.  Any other slope breaks the pattern; the report records the
    first offending offset.  A truncated final run mismatches at the end
    because the implicit zero tail cannot complete it.
    """
    check_p(p)
    seq = tuple(tail)
    waves = 0
    zeros = 0
    k = 0  # 0 at a uniform state, else the next expected slope is p - k
    for pos, v in enumerate(seq):
        if k == 0:
            if v == 0:
                zeros += 1
                continue
            if v != p:
                return WaveUnfoldReport(False, pos, waves, zeros, alpha, alpha + waves)
            k = 1
        elif v == p - k:
            k += 1
        else:
            return WaveUnfoldReport(False, pos, waves, zeros, alpha, alpha + waves)
        if k == p:
            waves += 1
            k = 0
    if k != 0:
        return WaveUnfoldReport(False, len(seq), waves, zeros, alpha, alpha + waves)
    return WaveUnfoldReport(True, None, waves, zeros, alpha, alpha + waves)
