"""Linear algebra of the window recurrences, exact where it matters.

The shot window advances by a fixed linear map plus a slope-driven kick.
Conjugating by the cumulative-sum basis turns that map into the
difference-vector system, whose matrix has row sums 1; centering by the
mean projects away the shared drift and leaves a contraction whose
nonzero spectrum is exactly the roots of a small polynomial with
positive ascending coefficients.  Those roots stay strictly inside the
unit disk (modulus at most ``(p-1)/p``), which is why the difference
vector freezes after logarithmically many columns.

Matrices and characteristic polynomials use ``fractions.Fraction`` end
to end; floating point only enters for root finding, eigenvalues and
norm summaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import inf, log2
from typing import Sequence

import numpy as np

from . import dds
from .errors import NoConvergence, RecurrenceMismatch
from .model import check_grains, check_p


class RationalPolynomial:
    """Univariate polynomial over the rationals, coefficients ascending."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        vals = [c if isinstance(c, Fraction) else Fraction(c) for c in coeffs]
        while vals and vals[-1] == 0:
            vals.pop()
        object.__setattr__(self, "coeffs", tuple(vals))

    def __setattr__(self, name, value):
        raise AttributeError("RationalPolynomial is immutable")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __eq__(self, other):
        if not isinstance(other, RationalPolynomial):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"RationalPolynomial({list(self.coeffs)!r})"

    def __add__(self, other):
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, c in enumerate(b):
            out[i] += c
        return RationalPolynomial(out)

    def __sub__(self, other):
        return self + (-1) * other

    def __mul__(self, other):
        if isinstance(other, RationalPolynomial):
            if not self.coeffs or not other.coeffs:
                return RationalPolynomial()
            out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
            for i, a in enumerate(self.coeffs):
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
            return RationalPolynomial(out)
        f = Fraction(other)
        return RationalPolynomial([f * c for c in self.coeffs])

    __rmul__ = __mul__

    def derivative(self) -> "RationalPolynomial":
        return RationalPolynomial(
            [i * c for i, c in enumerate(self.coeffs)][1:]
        )

    def __call__(self, x):
        # Horner; Fraction arithmetic mixes natively with float and complex
        acc = 0 * x
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def float_coeffs_desc(self) -> list[float]:
        return [float(c) for c in reversed(self.coeffs)]


class ExactMatrix:
    """Dense matrix over the rationals with exact arithmetic."""

    __slots__ = ("rows",)

    def __init__(self, rows):
        norm = tuple(
            tuple(c if isinstance(c, Fraction) else Fraction(c) for c in row)
            for row in rows
        )
        if norm and any(len(r) != len(norm[0]) for r in norm):
            raise ValueError("rows must have equal length")
        object.__setattr__(self, "rows", norm)

    def __setattr__(self, name, value):
        raise AttributeError("ExactMatrix is immutable")

    @classmethod
    def identity(cls, n: int) -> "ExactMatrix":
        one, zero = Fraction(1), Fraction(0)
        return cls([[one if i == j else zero for j in range(n)] for i in range(n)])

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), len(self.rows[0]) if self.rows else 0)

    def __eq__(self, other):
        if not isinstance(other, ExactMatrix):
            return NotImplemented
        return self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __repr__(self):
        return f"ExactMatrix({[list(r) for r in self.rows]!r})"

    def __add__(self, other):
        return ExactMatrix(
            [
                [a + b for a, b in zip(ra, rb)]
                for ra, rb in zip(self.rows, other.rows)
            ]
        )

    def __sub__(self, other):
        return ExactMatrix(
            [
                [a - b for a, b in zip(ra, rb)]
                for ra, rb in zip(self.rows, other.rows)
            ]
        )

    def scaled(self, k) -> "ExactMatrix":
        f = Fraction(k)
        return ExactMatrix([[f * a for a in row] for row in self.rows])

    def __matmul__(self, other):
        if isinstance(other, ExactMatrix):
            n, m = self.shape
            m2, q = other.shape
            if m != m2:
                raise ValueError("shape mismatch")
            cols = list(zip(*other.rows)) if other.rows else []
            return ExactMatrix(
                [
                    [sum(a * b for a, b in zip(row, col)) for col in cols]
                    for row in self.rows
                ]
            )
        vec = tuple(
            c if isinstance(c, Fraction) else Fraction(c) for c in other
        )
        if self.shape[1] != len(vec):
            raise ValueError("shape mismatch")
        return tuple(sum(a * v for a, v in zip(row, vec)) for row in self.rows)

    def trace(self) -> Fraction:
        return sum(self.rows[i][i] for i in range(len(self.rows)))

    def to_float(self) -> np.ndarray:
        return np.array([[float(c) for c in row] for row in self.rows], dtype=float)

    def charpoly(self) -> RationalPolynomial:
        """Characteristic polynomial ``det(xI - self)``, monic, exact.

        Faddeev-LeVerrier: repeatedly multiply by the matrix and read
        each coefficient off a trace, entirely in rational arithmetic.
        """
        n, m = self.shape
        if n != m:
            raise ValueError("characteristic polynomial needs a square matrix")
        coeffs = [Fraction(0)] * (n + 1)
        coeffs[n] = Fraction(1)
        ident = ExactMatrix.identity(n)
        mk = self
        for k in range(1, n + 1):
            ck = -mk.trace() / k
            coeffs[n - k] = ck
            if k < n:
                mk = self @ (mk + ident.scaled(ck))
        return RationalPolynomial(coeffs)


def poly_R(p: int) -> RationalPolynomial:
    """The contraction's root polynomial: ascending ``k/p`` then leading 1."""
    check_p(p)
    return RationalPolynomial(
        [Fraction(k, p) for k in range(1, p)] + [Fraction(1)]
    )


def poly_S(p: int) -> RationalPolynomial:
    """Reciprocal companion of :func:`poly_R`: coefficients ``p, p-1, ..., 1``."""
    check_p(p)
    return RationalPolynomial([Fraction(p - k) for k in range(p)])


@dataclass(frozen=True)
class BezoutWitness:
    """Certificate that ``poly_S`` and its derivative are coprime."""

    p: int
    ok: bool
    linear: RationalPolynomial
    quadratic: RationalPolynomial
    combination: RationalPolynomial


def bezout_witness(p: int) -> BezoutWitness:
    """Exhibit ``a * S + b * S' = 1`` with explicit small multipliers.

    Coprimality of ``S`` with its derivative certifies that ``S`` (and
    hence ``poly_R``) is squarefree, so all roots are simple.
    """
    check_p(p)
    q = p * (p + 1)
    a = RationalPolynomial([Fraction(1, p), Fraction(1 - p, q)])
    b = RationalPolynomial([0, Fraction(-1, q), Fraction(1, q)])
    s = poly_S(p)
    combo = a * s + b * s.derivative()
    return BezoutWitness(
        p=p,
        ok=combo == RationalPolynomial([1]),
        linear=a,
        quadratic=b,
        combination=combo,
    )


def shot_step_matrix(p: int) -> ExactMatrix:
    """One-column advance of the shot window: shift plus balance row."""
    check_p(p)
    n = p + 1
    rows = [[Fraction(0)] * n for _ in range(n)]
    for r in range(p):
        rows[r][r + 1] = Fraction(1)
    rows[p][0] = Fraction(-1, p)
    rows[p][p] = Fraction(p + 1, p)
    return ExactMatrix(rows)


def shot_kick(p: int) -> tuple[Fraction, ...]:
    """Slope coupling of the window advance: ``1/p`` in the last slot."""
    check_p(p)
    return (Fraction(0),) * p + (Fraction(1, p),)


def cumulative_basis(p: int) -> ExactMatrix:
    """Lower-triangular all-ones change of basis (partial sums)."""
    check_p(p)
    n = p + 1
    return ExactMatrix(
        [[Fraction(1) if j <= i else Fraction(0) for j in range(n)] for i in range(n)]
    )


def difference_basis(p: int) -> ExactMatrix:
    """Inverse of :func:`cumulative_basis`: ones on, minus ones below, the diagonal."""
    check_p(p)
    n = p + 1
    rows = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        rows[i][i] = Fraction(1)
        if i:
            rows[i][i - 1] = Fraction(-1)
    return ExactMatrix(rows)


def transformed_step_matrix(p: int) -> ExactMatrix:
    """The window advance conjugated into the difference basis."""
    return difference_basis(p) @ shot_step_matrix(p) @ cumulative_basis(p)


def averaging_matrix(p: int) -> ExactMatrix:
    """Advance of the difference vector: shift rows, then the mean row."""
    check_p(p)
    rows = [[Fraction(0)] * p for _ in range(p)]
    for r in range(p - 1):
        rows[r][r + 1] = Fraction(1)
    for j in range(p):
        rows[p - 1][j] = Fraction(1, p)
    return ExactMatrix(rows)


def averaging_kick(p: int) -> tuple[Fraction, ...]:
    """Slope coupling of the difference advance: 1 in the last slot."""
    check_p(p)
    return (Fraction(0),) * (p - 1) + (Fraction(1),)


def mean_centering(p: int) -> ExactMatrix:
    """Projection removing the mean from a ``p``-vector."""
    check_p(p)
    return ExactMatrix(
        [
            [
                (Fraction(1) if i == j else Fraction(0)) - Fraction(1, p)
                for j in range(p)
            ]
            for i in range(p)
        ]
    )


def centered_matrix(p: int) -> ExactMatrix:
    """The contraction governing the centered difference vector."""
    return mean_centering(p) @ averaging_matrix(p)


def centered_kick(p: int) -> tuple[Fraction, ...]:
    """Centered slope coupling."""
    return mean_centering(p) @ averaging_kick(p)


@dataclass(frozen=True)
class RootSet:
    """Roots of a polynomial with quality measures.

    ``residuals`` are the polynomial's absolute values at the roots and
    ``min_separation`` the smallest pairwise distance (``inf`` when fewer
    than two roots).
    """

    roots: tuple[complex, ...]
    residuals: tuple[float, ...]
    min_separation: float

    @property
    def max_modulus(self) -> float:
        return max((abs(z) for z in self.roots), default=0.0)


def _sorted_roots(roots) -> tuple[complex, ...]:
    return tuple(sorted(roots, key=lambda z: (round(z.real, 12), round(z.imag, 12))))


def find_roots(
    poly: RationalPolynomial, max_iter: int = 1000, step_tol: float = 1e-13
) -> tuple[complex, ...]:
    """All complex roots by simultaneous (Aberth) iteration.

    Converges when the largest correction drops below ``step_tol``;
    hitting the iteration cap raises :class:`NoConvergence`.  Residuals
    are the caller's acceptance gate, not the step count.
    """
    coeffs = np.array(poly.float_coeffs_desc(), dtype=complex)
    d = poly.degree
    if d <= 0:
        return ()
    lead = coeffs[0]
    radius = 1.0 + float(np.max(np.abs(coeffs / lead)))
    angles = 2.0 * np.pi * (np.arange(d) + 0.25) / d + 0.4
    z = 0.7 * radius * np.exp(1j * angles)
    deriv = np.polyder(coeffs)
    for _ in range(max_iter):
        pv = np.polyval(coeffs, z)
        dv = np.polyval(deriv, z)
        dv = np.where(dv == 0, 1e-300, dv)
        w = pv / dv
        corr = np.empty_like(z)
        for k in range(d):
            diff = z[k] - np.delete(z, k)
            diff = np.where(diff == 0, 1e-300, diff)
            s = np.sum(1.0 / diff)
            denom = 1.0 - w[k] * s
            if denom == 0:
                denom = 1e-300
            corr[k] = w[k] / denom
        z = z - corr
        if np.max(np.abs(corr)) < step_tol:
            return tuple(complex(v) for v in z)
    raise NoConvergence(f"root finder did not settle in {max_iter} iterations")


def _root_quality(poly: RationalPolynomial, roots) -> RootSet:
    roots = _sorted_roots(roots)
    residuals = tuple(abs(poly(complex(z))) for z in roots)
    sep = inf
    for i in range(len(roots)):
        for j in range(i + 1, len(roots)):
            sep = min(sep, abs(roots[i] - roots[j]))
    return RootSet(roots=roots, residuals=residuals, min_separation=sep)


def roots_R(p: int, max_iter: int = 1000) -> RootSet:
    """Roots of :func:`poly_R`, all of modulus at most ``(p-1)/p``."""
    check_p(p)
    poly = poly_R(p)
    return _root_quality(poly, find_roots(poly, max_iter=max_iter))


def eigvals_O(p: int) -> RootSet:
    """Eigenvalues of the centered contraction, measured against ``x * R(x)``.

    The residuals evaluate the predicted characteristic polynomial at
    the numerically computed eigenvalues, so they check the spectrum
    identity and the eigenvalue accuracy at once.
    """
    check_p(p)
    eigs = np.linalg.eigvals(centered_matrix(p).to_float())
    xr = RationalPolynomial([Fraction(0)] + list(poly_R(p).coeffs))
    return _root_quality(xr, [complex(v) for v in eigs])


def pair_distance(
    a: RootSet | Sequence[complex], b: RootSet | Sequence[complex]
) -> float:
    """Greedy matching distance between two root multisets of equal size."""
    xs = list(a.roots if isinstance(a, RootSet) else a)
    ys = list(b.roots if isinstance(b, RootSet) else b)
    if len(xs) != len(ys):
        raise ValueError("root sets differ in size")
    worst = 0.0
    for z in xs:
        best_i = min(range(len(ys)), key=lambda i: abs(z - ys[i]))
        worst = max(worst, abs(z - ys[best_i]))
        ys.pop(best_i)
    return worst


def perturbation_bound(p: int, tol: float = 1e-15, cap: int = 100000) -> float:
    """Tail-sum bound ``sum_j ||O^j L||_inf`` for the centered recurrence.

    The matrix's own infinity norm may exceed 1, so the bound is taken
    over powers, which decay at the spectral radius ``<= (p-1)/p``.
    """
    check_p(p)
    o = centered_matrix(p).to_float()
    v = np.array([float(c) for c in centered_kick(p)])
    total = 0.0
    for _ in range(cap):
        t = float(np.max(np.abs(v))) if v.size else 0.0
        total += t
        if t < tol * max(1.0, total):
            return total
        v = o @ v
    raise NoConvergence("perturbation series did not converge")


@dataclass(frozen=True)
class ZTrajectoryReport:
    """Centered difference vector along a real fixed-point trajectory.

    The recurrence is replayed exactly in rational arithmetic and
    compared entry by entry with directly centered data; a mismatch
    raises :class:`RecurrenceMismatch` (it would mean an implementation
    bug, not bad data).  Norm summaries are floats.
    """

    p: int
    n_grains: int
    steps: int
    perturbation_bound: float
    o_inf_norm: float
    spectral_radius: float
    sup_norms: tuple[float, ...]
    n0_znorm: int
    n0_spread: int
    spread0: int
    spread0_identity_ok: bool
    recurrence_exact: bool
    within_log_bound: bool | None


def z_trajectory(
    p: int,
    n: int,
    slopes,
    a0: int,
    c: float | None = None,
    d: float | None = None,
) -> ZTrajectoryReport:
    """Audit the centered difference trajectory of a stabilized pile.

    ``n0_znorm`` is the first column where the centered sup-norm falls
    within the perturbation tail bound; ``n0_spread`` the first where
    the raw min/max spread falls within twice that bound.  Both exist because
    the trajectory ends identically zero.  When ``c`` and ``d`` are given
    the report also says whether ``n0_znorm <= c * log2(n) + d``.
    """
    check_p(p)
    check_grains(n)
    omat = centered_matrix(p)
    kick = centered_kick(p)
    dmat = mean_centering(p)
    bound = perturbation_bound(p)
    o_float = omat.to_float()
    o_inf = float(np.max(np.abs(o_float).sum(axis=1)))
    spec_rad = float(np.max(np.abs(np.linalg.eigvals(o_float))))

    norms: list[float] = []
    n0_z = -1
    n0_s = -1
    spread0 = 0
    z_prev: tuple[Fraction, ...] | None = None
    b_prev = 0
    steps = 0
    for i, window, b in dds.iter_windows(p, slopes, a0, n):
        y = dds.to_averaging(window)
        if i == 0 and p > 1:
            spread0 = max(y) - min(y)
        z = dmat @ y
        if z_prev is not None:
            predicted = tuple(
                zz + Fraction(b_prev, p) * kk
                for zz, kk in zip(omat @ z_prev, kick)
            )
            if predicted != z:
                raise RecurrenceMismatch(
                    f"centered recurrence mismatch at column {i}"
                )
        nrm = max((abs(float(v)) for v in z), default=0.0)
        norms.append(nrm)
        if n0_z < 0 and nrm <= bound:
            n0_z = i
        if n0_s < 0 and (max(y) - min(y)) <= 2 * bound:
            n0_s = i
        z_prev = z
        b_prev = b
        steps = i
    within = None
    if c is not None and d is not None and n >= 2:
        within = n0_z <= c * log2(n) + d
    return ZTrajectoryReport(
        p=p,
        n_grains=n,
        steps=steps,
        perturbation_bound=bound,
        o_inf_norm=o_inf,
        spectral_radius=spec_rad,
        sup_norms=tuple(norms),
        n0_znorm=n0_z,
        n0_spread=n0_s,
        spread0=spread0,
        spread0_identity_ok=(p == 1) or (spread0 == n + a0),
        recurrence_exact=True,
        within_log_bound=within,
    )
