"""Configuration vectors: the combinatorial encoding of root arrangements.

A configuration vector (CV) records, left to right, the multiplicities of the
distinct roots of P and the positions of the roots of P^(k): a plain integer
is a class-A root, ``m_a`` a class-B root (multiplicity m < k coinciding with
a simple root of P^(k)), and a bare ``a`` a root of P^(k) strictly between
roots of P.
"""

from __future__ import annotations

from dataclasses import dataclass

from .polycore import RootConfiguration, derivative_roots

CLASS_A = "A"
CLASS_B = "B"
FREE_XI = "xi"

# Relative (to the smallest root gap) tolerance for declaring a coincidence.
DEFAULT_CLASSIFY_TOL = 1e-9


class AmbiguousCoincidenceError(ValueError):
    """A root pair falls in the dead band between coincident and separate."""


@dataclass(frozen=True)
class CvEntry:
    kind: str  # CLASS_A, CLASS_B or FREE_XI
    m: int | None = None

    def __post_init__(self):
        if self.kind not in (CLASS_A, CLASS_B, FREE_XI):
            raise ValueError("unknown entry kind %r" % self.kind)
        if self.kind == FREE_XI:
            if self.m is not None:
                raise ValueError("free-xi entries carry no multiplicity")
        elif self.m is None or self.m < 1:
            raise ValueError("multiplicity entries need m >= 1")

    def __str__(self) -> str:
        if self.kind == FREE_XI:
            return "a"
        if self.kind == CLASS_B:
            return "%d_a" % self.m
        return "%d" % self.m


def A(m: int) -> CvEntry:
    return CvEntry(CLASS_A, m)


def B(m: int) -> CvEntry:
    return CvEntry(CLASS_B, m)


def XI() -> CvEntry:
    return CvEntry(FREE_XI)


@dataclass(frozen=True)
class ConfigVector:
    entries: tuple[CvEntry, ...]
    n: int
    k: int

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def __str__(self) -> str:
        return "(" + ",".join(str(e) for e in self.entries) + ")"

    def mult_entries(self) -> tuple[CvEntry, ...]:
        return tuple(e for e in self.entries if e.kind != FREE_XI)

    def num_class_a(self) -> int:
        return sum(1 for e in self.entries if e.kind == CLASS_A)

    def num_class_b(self) -> int:
        return sum(1 for e in self.entries if e.kind == CLASS_B)

    def excess(self) -> int:
        return sum(e.m - 1 for e in self.mult_entries())

    def to_json(self) -> dict:
        ents = []
        for e in self.entries:
            if e.kind == FREE_XI:
                ents.append({"t": "xi"})
            else:
                ents.append({"t": e.kind, "m": e.m})
        return {"entries": ents, "n": self.n, "k": self.k}


def parse_cv(text: str, n: int, k: int) -> ConfigVector:
    """Parse the text syntax, e.g. ``(1,a,1,2_a,a,a,4)``."""
    body = text.strip()
    if body.startswith("(") and body.endswith(")"):
        body = body[1:-1]
    entries = []
    for tok in body.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok == "a":
            entries.append(XI())
        elif tok.endswith("_a"):
            entries.append(B(int(tok[:-2])))
        else:
            entries.append(A(int(tok)))
    return ConfigVector(tuple(entries), n, k)


def validate(cv: ConfigVector) -> list[str]:
    """Structural checks; returns a list of violations (empty = valid)."""
    violations = []
    if not 1 <= cv.k <= cv.n - 1:
        violations.append("k=%d out of range for n=%d" % (cv.k, cv.n))
        return violations
    mult_sum = sum(e.m for e in cv.mult_entries())
    if mult_sum != cv.n:
        violations.append("multiplicities sum to %d, expected n=%d" % (mult_sum, cv.n))
    for e in cv.entries:
        if e.kind == CLASS_B and e.m >= cv.k:
            violations.append("class-B multiplicity %d must be < k=%d" % (e.m, cv.k))
    xi_count = sum(1 for e in cv.entries if e.kind == FREE_XI)
    xi_count += cv.num_class_b()
    xi_count += sum(e.m - cv.k for e in cv.entries if e.kind == CLASS_A and e.m >= cv.k)
    if xi_count != cv.n - cv.k:
        violations.append(
            "xi count %d does not match n-k=%d" % (xi_count, cv.n - cv.k)
        )
    mults = cv.mult_entries()
    if mults:
        if mults[0].kind != CLASS_A:
            violations.append("first root entry must be class A")
        if len(mults) > 1 and mults[-1].kind != CLASS_A:
            violations.append("last root entry must be class A")
    else:
        violations.append("CV has no root entries")
    return violations


def _ranked_positions(cv: ConfigVector) -> tuple[list[int], list[int]]:
    """Ranks (by entry position) of the x-roots and xi-roots, with multiplicity."""
    x_ranks: list[int] = []
    xi_ranks: list[int] = []
    for pos, e in enumerate(cv.entries):
        if e.kind == FREE_XI:
            xi_ranks.append(pos)
        elif e.kind == CLASS_B:
            x_ranks.extend([pos] * e.m)
            xi_ranks.append(pos)
        else:
            x_ranks.extend([pos] * e.m)
            if e.m >= cv.k:
                xi_ranks.extend([pos] * (e.m - cv.k))
    return x_ranks, xi_ranks


def is_admissible(cv: ConfigVector) -> bool:
    """Rolle chain x_i <= xi_i <= x_{i+k} on the ranked expansion of the CV."""
    if validate(cv):
        return False
    x_ranks, xi_ranks = _ranked_positions(cv)
    k = cv.k
    for i, xr in enumerate(xi_ranks):
        if not (x_ranks[i] <= xr <= x_ranks[i + k]):
            return False
    return True


@dataclass(frozen=True)
class DimensionReport:
    excess: int
    num_class_b: int
    codim: int
    ambient_dim: int
    conv_dim: int

    def to_json(self) -> dict:
        return {
            "excess": self.excess,
            "num_class_b": self.num_class_b,
            "codim": self.codim,
            "ambient_dim": self.ambient_dim,
            "conv_dim": self.conv_dim,
        }


def dimension(cv: ConfigVector) -> DimensionReport:
    """Codimension = excess of multiplicity + number of class-B roots."""
    excess = cv.excess()
    nb = cv.num_class_b()
    codim = excess + nb
    report = DimensionReport(
        excess=excess,
        num_class_b=nb,
        codim=codim,
        ambient_dim=cv.n - codim,
        conv_dim=cv.n - codim - 2,
    )
    # Cross-check: the conventional dimension counts class-A roots minus 2.
    assert report.conv_dim == cv.num_class_a() - 2
    return report


def classify(
    rc: RootConfiguration,
    k: int,
    tol: float = DEFAULT_CLASSIFY_TOL,
    tol_abs: float | None = None,
) -> ConfigVector:
    """CV of the stratum containing rc, for the arrangement of P and P^(k).

    Coincidences are declared below tol (relative to the smallest root gap),
    or below tol_abs when given; distances in the band [tol, 10 tol) raise
    AmbiguousCoincidenceError rather than guessing.
    """
    n = rc.degree
    if not 1 <= k <= n - 1:
        raise ValueError("k out of range")
    dr = derivative_roots(rc, k)
    if rc.q == 1:
        return ConfigVector((A(n),), n, k)
    if tol_abs is None:
        tol_abs = tol * rc.min_gap()

    # Free xi items: derivative roots not carried by a multiplicity >= k+1.
    free_xi = []
    carried = {}
    for v, m in dr.distinct:
        hit = None
        for i, (y, my) in enumerate(zip(rc.roots, rc.mults)):
            if my > k and v == y:
                hit = i
                break
        if hit is None:
            free_xi.extend([v] * m)
        else:
            carried[hit] = m

    items: list[tuple[float, int, CvEntry]] = []  # (position, tiebreak, entry)
    used = [False] * len(free_xi)
    for i, (y, m) in enumerate(zip(rc.roots, rc.mults)):
        if m < k:
            best, dist = None, float("inf")
            for j, xi in enumerate(free_xi):
                if not used[j] and abs(xi - y) < dist:
                    best, dist = j, abs(xi - y)
            if best is not None and dist < tol_abs:
                used[best] = True
                items.append((y, 1, B(m)))
                continue
            if best is not None and tol_abs <= dist < 10 * tol_abs:
                raise AmbiguousCoincidenceError(
                    "root y_%d=%.17g vs xi=%.17g at distance %.3g (tol %.3g)"
                    % (i + 1, y, free_xi[best], dist, tol_abs)
                )
        items.append((y, 1, A(m)))
    for j, xi in enumerate(free_xi):
        if not used[j]:
            items.append((xi, 0, XI()))
    items.sort(key=lambda t: (t[0], t[1]))
    entries = tuple(e for _, _, e in items)
    return ConfigVector(entries, n, k)
