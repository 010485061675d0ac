"""Pattern analysis of stabilized configurations.

The slope tail of every fixed point settles into *waves*: maximal
descending runs ``p, p-1, ..., 1``, separated by at most one interior
zero, followed by the implicit zero tail.  This module locates the
earliest column where that pattern starts, checks support bounds with
exact integer arithmetic, bounds plateaus of equal heights, tracks how
the interior zero migrates as grains are added, and aggregates all of
it into scan rows with logarithmic fits.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from math import inf, isqrt, log2, sqrt

from . import dds
from .errors import InsufficientData
from .model import HeightConfig, check_grains, check_p, heights_from_slopes
from .stabilizer import Avalanche, FixedPoint, IncrementalStabilizer, trace_leftmost

WAVE = "wave"
ZERO = "zero"


def support(slopes) -> int:
    """Number of columns up to and including the last nonzero slope."""
    seq = tuple(slopes)
    w = len(seq)
    while w and seq[w - 1] == 0:
        w -= 1
    return w


@dataclass(frozen=True)
class WaveDecomposition:
    """Minimal suffix of a slope sequence matching the wave grammar.

    The strict grammar allows at most one interior ``zero`` block; the
    loose grammar allows any number.  ``start`` is the least column from
    which the tail parses; a tail that only matches trivially (the empty
    suffix) gives ``start == support``.  ``zero_positions`` are absolute
    columns of interior zero blocks.
    """

    p: int
    grammar: str
    start: int
    prefix: tuple[int, ...]
    blocks: tuple[str, ...]
    zero_positions: tuple[int, ...]
    interior_zero_count: int
    accepted: bool


def parse_waves(p, slopes, grammar: str = "strict") -> WaveDecomposition:
    """Find the minimal suffix start where the slope tail is pure waves.

    Tokenization is deterministic: a zero block is a single 0 and a wave
    block is the exact run ``p, p-1, ..., 1``, so each suffix parses in
    at most one way.  The all-zero tail past the support always parses,
    hence ``start <= support``.
    """
    check_p(p)
    if grammar not in ("strict", "loose"):
        raise ValueError(f"grammar must be 'strict' or 'loose', got {grammar!r}")
    seq = tuple(slopes)
    w = support(seq)
    seq = seq[:w]
    ok = [False] * (w + 1)
    zeros = [0] * (w + 1)
    ok[w] = True
    for i in range(w - 1, -1, -1):
        v = seq[i]
        if v == 0:
            ok[i] = ok[i + 1]
            zeros[i] = zeros[i + 1] + 1
        elif v == p and i + p <= w and ok[i + p]:
            good = True
            for d in range(1, p):
                if seq[i + d] != p - d:
                    good = False
                    break
            if good:
                ok[i] = True
                zeros[i] = zeros[i + p]
    limit = 1 if grammar == "strict" else w + 1
    start = w
    for i in range(w + 1):
        if ok[i] and zeros[i] <= limit:
            start = i
            break
    blocks: list[str] = []
    zpos: list[int] = []
    i = start
    while i < w:
        if seq[i] == 0:
            blocks.append(ZERO)
            zpos.append(i)
            i += 1
        else:
            blocks.append(WAVE)
            i += p
    return WaveDecomposition(
        p=p,
        grammar=grammar,
        start=start,
        prefix=seq[:start],
        blocks=tuple(blocks),
        zero_positions=tuple(zpos),
        interior_zero_count=len(zpos),
        accepted=True,
    )


@dataclass(frozen=True)
class SupportReport:
    """Support of a fixed point against its two-sided square-root bounds.

    ``lower``/``upper`` are float renderings for display; the boolean is
    decided purely with integer comparisons (no rounding involved).
    """

    p: int
    n_grains: int
    width: int
    lower: float
    upper: float
    within_bounds: bool


def support_bounds(p: int, n: int, width: int) -> SupportReport:
    """Check ``sqrt(n)/p - 1 < width < (p+1) sqrt(n) + p + 1`` exactly.

    Both inequalities are cross-multiplied into pure integer comparisons:
    the lower bound is ``n < p**2 (width+1)**2`` and the upper bound is
    ``(width - p - 1)**2 < (p+1)**2 n`` (trivially true for small widths).
    """
    check_p(p)
    check_grains(n)
    if width < 0:
        raise ValueError("width must be non-negative")
    lower_ok = n < p * p * (width + 1) * (width + 1)
    upper_ok = width <= p + 1 or (width - p - 1) ** 2 < (p + 1) ** 2 * n
    return SupportReport(
        p=p,
        n_grains=n,
        width=width,
        lower=sqrt(n) / p - 1,
        upper=(p + 1) * sqrt(n) + p + 1,
        within_bounds=lower_ok and upper_ok,
    )


def max_plateau(heights) -> int:
    """Length of the longest run of equal nonzero heights (1 when none)."""
    seq = tuple(heights)
    best = 1
    run = 0
    prev = None
    for v in seq:
        if v != 0 and v == prev:
            run += 1
        else:
            run = 1 if v != 0 else 0
        if run > best:
            best = run
        prev = v
    return best


@dataclass(frozen=True)
class PlateauTrajectoryReport:
    """Plateau audit of a full leftmost stabilization."""

    p: int
    n_grains: int
    firings: int
    max_plateau_seen: int
    bound: int
    ok: bool
    first_violation_at: int | None


def check_plateaus_along_leftmost(p: int, n: int) -> PlateauTrajectoryReport:
    """Stabilize ``n`` grains and bound plateaus in every intermediate state.

    After each firing only columns ``i .. i+p`` changed height, so it is
    enough to remeasure runs inside a window of ``p + 2`` columns on
    either side: any longer run already violates the ``p + 1`` bound and
    is still detected because at least ``p + 2`` of its columns lie in
    the window.
    """
    check_p(p)
    check_grains(n)
    heights = [0] * ((p + 1) * (isqrt(n) + 2) + 4 * p + 8)
    heights[0] = n
    bound = p + 1
    state = {"max": 1, "firings": 0, "bad_at": None}

    def on_fire(i: int) -> None:
        heights[i] -= p
        for j in range(i + 1, i + p + 1):
            heights[j] += 1
        state["firings"] += 1
        lo = max(0, i - p - 2)
        hi = i + 2 * p + 2
        run = 0
        prev = None
        local = 1
        for j in range(lo, hi + 1):
            v = heights[j]
            if v != 0 and v == prev:
                run += 1
            else:
                run = 1 if v != 0 else 0
            if run > local:
                local = run
            prev = v
        if local > state["max"]:
            state["max"] = local
        if local > bound and state["bad_at"] is None:
            state["bad_at"] = state["firings"]

    trace_leftmost(p, n, on_fire)
    return PlateauTrajectoryReport(
        p=p,
        n_grains=n,
        firings=state["firings"],
        max_plateau_seen=state["max"],
        bound=bound,
        ok=state["bad_at"] is None,
        first_violation_at=state["bad_at"],
    )


@dataclass(frozen=True)
class ClimbingZeroReport:
    """How the interior zero moved across one added grain.

    Only avalanches reaching into the wave region can rearrange it; for
    those the zero count must stay at most 1 and, when both sides show an
    interior zero past the shared wave region, the zero may only move
    left.
    """

    k: int
    applicable: bool
    prev_start: int
    next_start: int
    prev_zero: int | None
    next_zero: int | None
    ok: bool
    reason: str


def climbing_zero_check(
    prev: FixedPoint, nxt: FixedPoint, avalanche: Avalanche
) -> ClimbingZeroReport:
    """Compare the interior zeros of two consecutive fixed points.

    An avalanche only influences columns up to ``max_fired + p``, so one
    that stops short of the wave region must leave the interior zero
    exactly where it was.
    """
    p = prev.p
    dp = parse_waves(p, prev.slopes, "strict")
    dn = parse_waves(p, nxt.slopes, "strict")
    pz = dp.zero_positions[0] if dp.zero_positions else None
    nz = dn.zero_positions[0] if dn.zero_positions else None
    applicable = (
        avalanche.max_fired is not None and avalanche.max_fired + p >= dp.start
    )
    ok = True
    reason = "ok"
    if dn.interior_zero_count > 1:
        ok = False
        reason = f"next tail has {dn.interior_zero_count} interior zeros"
    elif not applicable:
        if pz is not None and nz != pz:
            ok = False
            reason = "zero moved without the avalanche reaching the wave region"
    else:
        shared = max(dp.start, dn.start)
        if pz is not None and nz is not None and pz >= shared and nz >= shared:
            if nz > pz:
                ok = False
                reason = f"zero moved right: {pz} -> {nz}"
    return ClimbingZeroReport(
        k=nxt.n_grains,
        applicable=applicable,
        prev_start=dp.start,
        next_start=dn.start,
        prev_zero=pz,
        next_zero=nz,
        ok=ok,
        reason=reason,
    )


@dataclass(frozen=True)
class ScanRow:
    """One sampled grain count in a scan.

    ``density_column`` is the running maximum avalanche density column,
    available only on incremental scans.  ``elapsed_us`` is 0 unless the
    scan was asked to time itself, keeping default output reproducible.
    """

    n_grains: int
    p: int
    width: int
    n_strict: int
    n_loose: int
    uniform_index: int
    interior_zeros: int
    density_column: int | None
    ambiguous_count: int
    elapsed_us: int


def _row_from_fixed_point(fp: FixedPoint, density: int | None, elapsed_us: int) -> ScanRow:
    strict = parse_waves(fp.p, fp.slopes, "strict")
    loose = parse_waves(fp.p, fp.slopes, "loose")
    a0 = fp.shot_at(0)
    rep = dds.trajectory_report(fp.p, fp.slopes, a0, fp.n_grains, check=False)
    return ScanRow(
        n_grains=fp.n_grains,
        p=fp.p,
        width=fp.slopes.support,
        n_strict=strict.start,
        n_loose=loose.start,
        uniform_index=rep.uniform_index,
        interior_zeros=strict.interior_zero_count,
        density_column=density,
        ambiguous_count=rep.ambiguous_count,
        elapsed_us=elapsed_us,
    )


def scan_rows(
    p: int,
    n_values,
    incremental: bool = True,
    timing: bool = False,
    threads: int = 1,
) -> list[ScanRow]:
    """Stabilize at each sampled grain count and summarize the result.

    Incremental scans share one growing pile across samples and track
    avalanche density columns on the way.  Direct scans stabilize each
    sample from scratch and may spread the work over ``threads``
    processes; rows come back in sample order either way.
    """
    check_p(p)
    targets = sorted(set(n_values))
    if not targets:
        raise ValueError("no grain counts to scan")
    for n in targets:
        check_grains(n)
    rows: list[ScanRow] = []
    if incremental:
        inc = IncrementalStabilizer(p, expect=targets[-1], track_density=True)
        for n in targets:
            t0 = time.perf_counter() if timing else 0.0
            inc.advance_to(n)
            fp = inc.snapshot()
            row = _row_from_fixed_point(
                fp,
                inc.density_max,
                int((time.perf_counter() - t0) * 1e6) if timing else 0,
            )
            rows.append(row)
        return rows
    if threads > 1:
        rows = _scan_direct_parallel(p, targets, timing, threads)
    else:
        rows = [_direct_row(p, n, timing) for n in targets]
    return rows


def _direct_row(p: int, n: int, timing: bool) -> ScanRow:
    from .stabilizer import stabilize

    t0 = time.perf_counter() if timing else 0.0
    fp = stabilize(p, n)
    return _row_from_fixed_point(
        fp, None, int((time.perf_counter() - t0) * 1e6) if timing else 0
    )


def _direct_row_args(args) -> ScanRow:
    return _direct_row(*args)


def _scan_direct_parallel(p, targets, timing, threads) -> list[ScanRow]:
    import multiprocessing as mp

    try:
        ctx = mp.get_context("fork")
        with ctx.Pool(threads) as pool:
            return pool.map(_direct_row_args, [(p, n, timing) for n in targets])
    except (OSError, ValueError):
        # some sandboxes forbid subprocess semaphores; fall back to serial
        return [_direct_row(p, n, timing) for n in targets]


@dataclass(frozen=True)
class LogFit:
    """Least-squares fit ``value ~ c * log2(n) + d`` plus the worst ratio."""

    field: str
    c: float
    d: float
    max_ratio: float
    points: int


def log_fit(rows, field: str) -> LogFit:
    """Fit a scan column against ``log2(n)``.

    Requires at least 10 usable rows spanning a factor of 100 in ``n``;
    otherwise raises :class:`InsufficientData`.  ``max_ratio`` maximizes
    ``value / log2(n)`` over rows with ``n >= 16``.
    """
    pts = [
        (r.n_grains, getattr(r, field))
        for r in rows
        if getattr(r, field) is not None and r.n_grains >= 2
    ]
    if len(pts) < 10:
        raise InsufficientData(f"need at least 10 rows for a fit, got {len(pts)}")
    ns = [n for n, _ in pts]
    if max(ns) < 100 * min(ns):
        raise InsufficientData("need two decades of grain counts for a fit")
    xs = [log2(n) for n, _ in pts]
    ys = [float(v) for _, v in pts]
    m = len(xs)
    sx = sum(xs)
    sy = sum(ys)
    sxx = sum(x * x for x in xs)
    sxy = sum(x * y for x, y in zip(xs, ys))
    denom = m * sxx - sx * sx
    c = (m * sxy - sx * sy) / denom
    d = (sy - c * sx) / m
    ratios = [v / log2(n) for n, v in pts if n >= 16]
    return LogFit(
        field=field,
        c=c,
        d=d,
        max_ratio=max(ratios) if ratios else -inf,
        points=m,
    )


@dataclass(frozen=True)
class DecadeGate:
    """Regression gate comparing the last two decades of a scan column."""

    field: str
    prev_max_ratio: float
    last_max_ratio: float
    ok: bool


def decade_regression(rows, field: str, slack: float = 1.25) -> DecadeGate:
    """Require the worst ``value/log2(n)`` of the last decade to stay
    within ``slack`` times the previous decade's worst."""
    pts = [
        (r.n_grains, getattr(r, field))
        for r in rows
        if getattr(r, field) is not None and r.n_grains >= 16
    ]
    if not pts:
        raise InsufficientData("no rows with n >= 16")
    top = max(n for n, _ in pts)
    last = [v / log2(n) for n, v in pts if top / 10 < n <= top]
    prev = [v / log2(n) for n, v in pts if top / 100 < n <= top / 10]
    if not last or not prev:
        raise InsufficientData("need samples in each of the last two decades")
    last_max = max(last)
    prev_max = max(prev)
    return DecadeGate(
        field=field,
        prev_max_ratio=prev_max,
        last_max_ratio=last_max,
        ok=last_max <= slack * max(prev_max, 1e-12),
    )


def heights_of(fp: FixedPoint) -> HeightConfig:
    """Heights of a fixed point's slope configuration."""
    return heights_from_slopes(fp.slopes)
