"""Enumeration of admissible configuration vectors, stratum adjacencies and
the unique point of each zero-dimensional stratum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import configvec as cvm
from .configvec import CLASS_A, CLASS_B, FREE_XI, A, B, XI, ConfigVector, CvEntry
from .polycore import RootConfiguration, derivative_roots
from .sensitivity import sensitivity_rows


class NewtonFailure(RuntimeError):
    """Zero-dimensional point solve did not converge."""


def _compositions(total: int):
    """Ordered tuples of positive integers summing to total."""
    if total == 0:
        yield ()
        return
    for first in range(1, total + 1):
        for rest in _compositions(total - first):
            yield (first,) + rest


def _weak_compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _weak_compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_cvs(
    n: int, k: int, dim_filter: int | None = None
) -> list[ConfigVector]:
    """All admissible CVs for (n, k), optionally restricted to one dimension."""
    if not 1 <= k <= n - 1:
        raise ValueError("k out of range")
    out = []
    seen = set()
    for comp in _compositions(n):
        q = len(comp)
        interior = [i for i in range(1, q - 1) if comp[i] < k]
        for mask in range(1 << len(interior)):
            b_set = {interior[i] for i in range(len(interior)) if mask >> i & 1}
            fixed_xi = len(b_set) + sum(m - k for m in comp if m >= k)
            free = (n - k) - fixed_xi
            if free < 0:
                continue
            for gaps in _weak_compositions(free, q + 1):
                entries: list[CvEntry] = []
                for g, _ in enumerate(comp):
                    entries.extend([XI()] * gaps[g])
                    entries.append(B(comp[g]) if g in b_set else A(comp[g]))
                entries.extend([XI()] * gaps[q])
                cv = ConfigVector(tuple(entries), n, k)
                if cvm.is_admissible(cv):
                    key = str(cv)
                    if key not in seen:
                        seen.add(key)
                        out.append(cv)
    if dim_filter is not None:
        out = [cv for cv in out if cvm.dimension(cv).conv_dim == dim_filter]
    out.sort(key=lambda cv: (cvm.dimension(cv).conv_dim, str(cv)))
    return out


def _zero_dim_sub_cvs(r: int, k: int) -> list[ConfigVector]:
    """Zero-dimensional CVs on a bifurcating cluster of total multiplicity r.

    For r <= k the cluster carries no derivative roots, so only plain splits
    into two class-A parts remain.
    """
    if r > k:
        return enumerate_cvs(r, k, dim_filter=0)
    out = []
    for r1 in range(1, r):
        out.append(ConfigVector((A(r1), A(r - r1)), r, k))
    return out


def expansions(cv: ConfigVector) -> list[ConfigVector]:
    """All CVs one dimension higher whose closures contain this stratum."""
    results: list[ConfigVector] = []
    seen = set()

    def emit(entries: tuple[CvEntry, ...]):
        cand = ConfigVector(entries, cv.n, cv.k)
        if cvm.is_admissible(cand):
            key = str(cand)
            if key not in seen:
                seen.add(key)
                results.append(cand)

    ents = cv.entries
    for pos, e in enumerate(ents):
        before, after = ents[:pos], ents[pos + 1:]
        if e.kind == CLASS_B:
            # i) detach the coincident derivative root to either side.
            emit(before + (A(e.m), XI()) + after)
            emit(before + (XI(), A(e.m)) + after)
            # ii) split the class-B root, one part keeping the coincidence.
            for r1 in range(1, e.m):
                r2 = e.m - r1
                emit(before + (A(r1), B(r2)) + after)
                emit(before + (B(r1), A(r2)) + after)
        elif e.kind == CLASS_A and e.m >= 2:
            # iii) bifurcate into a zero-dimensional sub-configuration.
            for sub in _zero_dim_sub_cvs(e.m, cv.k):
                emit(before + sub.entries + after)
    return results


@dataclass
class StrataPoset:
    n: int
    k: int
    nodes: list[ConfigVector]
    edges: list[tuple[int, int]]  # (lower node index, higher node index)
    dims: list[int]

    def out_edges(self, i: int) -> list[int]:
        return [b for a, b in self.edges if a == i]

    def index_of(self, cv: ConfigVector) -> int:
        key = str(cv)
        for i, node in enumerate(self.nodes):
            if str(node) == key:
                return i
        raise KeyError(key)

    def to_dot(self) -> str:
        lines = ["digraph strata {"]
        for i, cv in enumerate(self.nodes):
            lines.append('  n%d [label="%s", dim=%d];' % (i, cv, self.dims[i]))
        for a, b in self.edges:
            lines.append("  n%d -> n%d;" % (a, b))
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_poset(n: int, k: int) -> StrataPoset:
    nodes = enumerate_cvs(n, k)
    index = {str(cv): i for i, cv in enumerate(nodes)}
    dims = [cvm.dimension(cv).conv_dim for cv in nodes]
    edges = []
    for i, cv in enumerate(nodes):
        for up in expansions(cv):
            j = index[str(up)]
            assert dims[j] == dims[i] + 1
            edges.append((i, j))
    edges.sort()
    return StrataPoset(n=n, k=k, nodes=nodes, edges=edges, dims=dims)


def _bound_xi_flat_indices(cv: ConfigVector) -> dict[int, int]:
    """Map root index (among distinct roots) -> flat index of its bound xi."""
    bindings = {}
    xi_count = 0
    root_idx = 0
    for e in cv.entries:
        if e.kind == FREE_XI:
            xi_count += 1
        elif e.kind == CLASS_B:
            bindings[root_idx] = xi_count
            xi_count += 1
            root_idx += 1
        else:
            if e.m >= cv.k:
                xi_count += e.m - cv.k
            root_idx += 1
    return bindings


def zero_dim_point(
    cv: ConfigVector, max_restarts: int = 5, seed: int = 0
) -> RootConfiguration:
    """The unique gamma-normalized configuration realizing a dim-0 CV."""
    if cvm.dimension(cv).conv_dim != 0:
        raise ValueError("CV %s is not zero-dimensional" % cv)
    mults = tuple(e.m for e in cv.mult_entries())
    q = len(mults)
    if q == 2:
        return RootConfiguration((0.0, 1.0), mults)
    bindings = _bound_xi_flat_indices(cv)
    interior = list(range(1, q - 1))  # all interior roots are class B at dim 0
    assert sorted(bindings) == interior
    rng = np.random.default_rng(seed)

    y0 = np.linspace(0.0, 1.0, q)
    for attempt in range(max_restarts + 1):
        y = y0.copy()
        if attempt > 0:
            y[1:-1] = np.sort(rng.uniform(0.05, 0.95, q - 2))
        ok = True
        for _ in range(100):
            rc = RootConfiguration(tuple(y), mults)
            xs = derivative_roots(rc, cv.k).flat()
            res = np.array([y[i] - xs[bindings[i]] for i in interior])
            if np.max(np.abs(res)) < 1e-13:
                break
            rows = sensitivity_rows(rc, cv.k, [bindings[i] for i in interior])
            jac = np.eye(len(interior)) - rows[:, interior]
            try:
                step = np.linalg.solve(jac, -res)
            except np.linalg.LinAlgError:
                ok = False
                break
            damp = 1.0
            for _ in range(40):
                trial = y.copy()
                trial[interior] += damp * step
                if np.all(np.diff(trial) > 1e-12):
                    break
                damp *= 0.5
            else:
                ok = False
                break
            y[interior] += damp * step
        else:
            ok = False
        if ok and np.max(np.abs(res)) < 1e-13:
            rc = RootConfiguration(tuple(y), mults)
            if str(cvm.classify(rc, cv.k)) == str(cv):
                return rc
    raise NewtonFailure("zero_dim_point did not converge for %s" % cv)
