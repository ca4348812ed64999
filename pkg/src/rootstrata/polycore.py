"""Polynomial core: root/coefficient conversions, derivative roots, normalizations.

All polynomials are monic, real and hyperbolic (only real roots).  A
configuration is stored as the strictly increasing distinct roots together
with their multiplicities; coefficient vectors omit the leading 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

# Absolute tolerance for locating simple roots (gamma-normalized scale).
EPS_ROOT = 1e-12
# Gap below which roots recovered from coefficients are merged into one.
EPS_CLUSTER = 1e-8


class NotHyperbolicError(ValueError):
    """Raised when coefficients do not define a polynomial with all real roots."""


class DegenerateError(ValueError):
    """Raised when an operation is undefined for the given configuration."""


@dataclass(frozen=True)
class RootConfiguration:
    """Distinct real roots y_1 < ... < y_q with positive multiplicities."""

    roots: tuple[float, ...]
    mults: tuple[int, ...]

    def __post_init__(self):
        roots = tuple(float(r) for r in self.roots)
        mults = tuple(int(m) for m in self.mults)
        object.__setattr__(self, "roots", roots)
        object.__setattr__(self, "mults", mults)
        if len(roots) != len(mults) or not roots:
            raise ValueError("roots and mults must be equal-length and non-empty")
        if any(m < 1 for m in mults):
            raise ValueError("multiplicities must be positive")
        if any(roots[i] >= roots[i + 1] for i in range(len(roots) - 1)):
            raise ValueError("roots must be strictly increasing")

    @property
    def degree(self) -> int:
        return sum(self.mults)

    @property
    def q(self) -> int:
        return len(self.roots)

    def flat_roots(self) -> tuple[float, ...]:
        """All roots repeated by multiplicity, non-decreasing."""
        out = []
        for r, m in zip(self.roots, self.mults):
            out.extend([r] * m)
        return tuple(out)

    def min_gap(self) -> float:
        if self.q < 2:
            return 0.0
        return min(self.roots[i + 1] - self.roots[i] for i in range(self.q - 1))


@dataclass(frozen=True)
class CoefficientVector:
    """Coefficients (a_1, ..., a_n) of monic x^n + a_1 x^{n-1} + ... + a_n."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    def as_poly(self) -> np.ndarray:
        """Full coefficient array, highest power first (numpy convention)."""
        return np.array((1.0,) + self.coeffs)


@dataclass(frozen=True)
class DerivedRoots:
    """Roots of P^(k): distinct values with multiplicities, sorted increasing."""

    k: int
    distinct: tuple[tuple[float, int], ...]

    @property
    def count(self) -> int:
        return sum(m for _, m in self.distinct)

    def flat(self) -> tuple[float, ...]:
        out = []
        for v, m in self.distinct:
            out.extend([v] * m)
        return tuple(out)

    def values(self) -> tuple[float, ...]:
        return tuple(v for v, _ in self.distinct)


def coeffs_from_roots(rc: RootConfiguration) -> CoefficientVector:
    """Expand prod (x - y_i)^{m_i} by incremental multiplication of linear factors."""
    p = np.array([1.0])
    for r, m in zip(rc.roots, rc.mults):
        for _ in range(m):
            p = np.convolve(p, [1.0, -r])
    return CoefficientVector(tuple(p[1:]))


def poly_from_roots(rc: RootConfiguration) -> np.ndarray:
    return coeffs_from_roots(rc).as_poly()


def _deflate(p: np.ndarray, r: float) -> np.ndarray:
    """Synthetic division of p by (x - r); remainder discarded."""
    q = np.empty(len(p) - 1, dtype=p.dtype)
    acc = p.dtype.type(0)
    for i in range(len(p) - 1):
        acc = p[i] + r * acc
        q[i] = acc
    return q


def _horner(p: np.ndarray, x: np.ndarray) -> np.ndarray:
    """np.polyval without its per-call setup cost (hot path)."""
    acc = np.full_like(x, p[0])
    for c in p[1:]:
        acc *= x
        acc += c
    return acc


def _bisect_roots(
    p: np.ndarray, lo: np.ndarray, hi: np.ndarray, sign_lo: np.ndarray
) -> np.ndarray:
    """One simple root of p per bracket (lo_i, hi_i), all solved in lockstep.

    sign_lo gives the sign p takes on (lo_i, root_i), known a priori from the
    interlacing structure; evaluating p at the endpoints themselves can be
    pure roundoff when other roots crowd a bracket, so it is passed in rather
    than measured.
    """
    lo = lo.astype(p.dtype).copy()
    hi = hi.astype(p.dtype).copy()
    # Exact endpoint roots occur when a root of P coincides with a root of
    # the derivative (a squeezed configuration); return them untouched.
    pinned = np.where(_horner(p, lo) == 0.0, lo, np.nan)
    pinned = np.where(_horner(p, hi) == 0.0, hi, pinned)
    # 52 halvings resolve any bracket inside [0, 1]-scale data to one ulp.
    for _ in range(52):
        mid = 0.5 * (lo + hi)
        take_lo = _horner(p, mid) * sign_lo > 0
        lo = np.where(take_lo, mid, lo)
        hi = np.where(take_lo, hi, mid)
    # Newton polish; the roots are simple in the deflated polynomial.
    x = 0.5 * (lo + hi)
    dp = np.polyder(p)
    for _ in range(3):
        d = _horner(dp, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = _horner(p, x) / d
        xn = x - step
        ok = np.isfinite(xn) & (xn > lo) & (xn < hi)
        x = np.where(ok, xn, x)
    return np.where(np.isnan(pinned), x, pinned)


def _derivative_step(
    distinct: list[tuple[float, int]], pcoef: np.ndarray
) -> tuple[list[tuple[float, int]], np.ndarray]:
    """Distinct roots of the derivative given those of pcoef (hyperbolic)."""
    dcoef = np.polyder(pcoef)
    # Carried roots: multiplicity drops by one, position unchanged.
    carried = [(v, m - 1) for v, m in distinct if m >= 2]
    # Deflate the carried roots; the quotient has one simple root per gap.
    q = dcoef.copy()
    for v, m in carried:
        for _ in range(m):
            q = _deflate(q, v)
    # Sign of q just right of distinct root i: the leading coefficient is
    # positive and exactly the interior roots of gaps i..G-1 lie above it.
    gaps = len(distinct) - 1
    if gaps == 0:
        interior = []
    else:
        lo = np.array([v for v, _ in distinct[:-1]])
        hi = np.array([v for v, _ in distinct[1:]])
        sign_lo = np.where(np.arange(gaps) % 2 == gaps % 2, 1.0, -1.0)
        interior = list(_bisect_roots(q, lo, hi, sign_lo))
    merged = sorted(carried + [(v, 1) for v in interior])
    return merged, dcoef


def derivative_roots(rc: RootConfiguration, k: int) -> DerivedRoots:
    """All n-k roots of P^(k), multiplicities carried exactly along the chain."""
    return _derivative_roots_cached(rc.roots, rc.mults, k)


@lru_cache(maxsize=16384)
def _derivative_roots_cached(
    roots: tuple[float, ...], mults: tuple[int, ...], k: int
) -> DerivedRoots:
    n = sum(mults)
    if not 1 <= k <= n - 1:
        raise ValueError("k must satisfy 1 <= k <= n-1, got k=%d, n=%d" % (k, n))
    distinct = list(zip(roots, mults))
    # The expanded coefficients are badly conditioned for clustered roots, so
    # the whole chain runs in extended precision; only the final root values
    # are rounded back to doubles.
    pcoef = np.array([1.0], dtype=np.longdouble)
    for r, m in zip(roots, mults):
        for _ in range(m):
            pcoef = np.convolve(pcoef, np.array([1.0, -r], dtype=np.longdouble))
    for _ in range(k):
        distinct, pcoef = _derivative_step(distinct, pcoef)
    return DerivedRoots(k=k, distinct=tuple((float(v), m) for v, m in distinct))


def gamma_normalize(rc: RootConfiguration) -> RootConfiguration:
    """Affine image with smallest root at 0 and greatest at 1."""
    if rc.q < 2:
        raise DegenerateError("gamma normalization needs two distinct roots")
    lo, hi = rc.roots[0], rc.roots[-1]
    scale = hi - lo
    roots = tuple((r - lo) / scale for r in rc.roots)
    # Pin the endpoints exactly.
    roots = (0.0,) + roots[1:-1] + (1.0,)
    return RootConfiguration(roots, rc.mults)


def std_normalize(rc: RootConfiguration) -> RootConfiguration:
    """Affine image with a_1 = 0 and a_2 = -1."""
    n = rc.degree
    if rc.q < 2:
        raise DegenerateError("x^n-shaped polynomial has no a_2 = -1 representative")
    mean = sum(m * r for r, m in zip(rc.roots, rc.mults)) / n
    centered = [r - mean for r in rc.roots]
    # With a_1 = 0, a_2 = -(1/2) sum m_i y_i^2; rescale to make it -1.
    p2 = sum(m * c * c for c, m in zip(centered, rc.mults))
    t = np.sqrt(2.0 / p2)
    return RootConfiguration(tuple(c * t for c in centered), rc.mults)


def roots_from_coeffs(cv: CoefficientVector) -> RootConfiguration:
    """Recover the root configuration; rejects non-hyperbolic input."""
    p = cv.as_poly()
    rts = np.roots(p)
    scale = 1.0 + np.max(np.abs(rts)) if len(rts) else 1.0
    if np.any(np.abs(rts.imag) > 1e-6 * scale):
        raise NotHyperbolicError("complex root detected: %s" % rts[np.argmax(np.abs(rts.imag))])
    vals = np.sort(rts.real)
    clusters: list[list[float]] = [[vals[0]]]
    for v in vals[1:]:
        if v - clusters[-1][-1] < EPS_CLUSTER * max(1.0, scale):
            clusters[-1].append(v)
        else:
            clusters.append([v])
    roots = tuple(float(np.mean(c)) for c in clusters)
    mults = tuple(len(c) for c in clusters)
    return RootConfiguration(roots, mults)
