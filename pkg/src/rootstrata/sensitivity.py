"""Partial derivatives of the roots of P^(k) with respect to the distinct
roots of P, their finite-difference oracle, sum identities and the
diagonal-dominance transversality certificates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polycore import (
    DegenerateError,
    RootConfiguration,
    derivative_roots,
    poly_from_roots,
)

ACTIVE_EQUALITY_TOL = 1e-8


class NonSimpleRootError(ValueError):
    """A requested derivative-root row is not a simple root of P^(k)."""


@dataclass(frozen=True)
class SensitivityMatrix:
    """S[j][i] = d(xi_j)/d(y_i), multiplicity of y_i folded in."""

    k: int
    xi: tuple[float, ...]  # row roots, the n-k roots of P^(k) in order
    matrix: np.ndarray  # shape (n-k, q)

    def row_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=0)


def _synthetic_div(p: np.ndarray, r: float) -> np.ndarray:
    q = np.empty(len(p) - 1)
    acc = 0.0
    for i in range(len(p) - 1):
        acc = p[i] + r * acc
        q[i] = acc
    return q


def _flat_mults(dr_distinct) -> list[tuple[float, int]]:
    return list(dr_distinct)


def sensitivity_rows(
    rc: RootConfiguration, k: int, flat_indices: list[int]
) -> np.ndarray:
    """Rows of the sensitivity matrix for the given flat xi indices.

    Each requested xi must be a simple root of P^(k).  Entry (row, i) is
    -R_i^(k)(xi) / P^(k+1)(xi) with R_i = -m_i P/(x - y_i) by exact
    synthetic division.
    """
    dr = derivative_roots(rc, k)
    mult_of = {}
    flat_vals = []
    for v, m in dr.distinct:
        for _ in range(m):
            flat_vals.append(v)
            mult_of[v] = m
    p = poly_from_roots(rc)
    pk1 = p
    for _ in range(k + 1):
        pk1 = np.polyder(pk1)
    rows = np.empty((len(flat_indices), rc.q))
    for r_out, j in enumerate(flat_indices):
        xi = flat_vals[j]
        if mult_of[xi] != 1:
            raise NonSimpleRootError(
                "xi_%d = %.17g has multiplicity %d in P^(%d)"
                % (j + 1, xi, mult_of[xi], k)
            )
        den = np.polyval(pk1, xi)
        if den == 0.0:
            raise NonSimpleRootError("P^(k+1) vanishes at xi_%d = %.17g" % (j + 1, xi))
        for i, (y, m) in enumerate(zip(rc.roots, rc.mults)):
            ri = -m * _synthetic_div(p, y)
            rik = ri
            for _ in range(k):
                rik = np.polyder(rik)
            rows[r_out, i] = -np.polyval(rik, xi) / den
    return rows


def sensitivity_matrix(rc: RootConfiguration, k: int) -> SensitivityMatrix:
    """Full matrix over all n-k roots of P^(k); every xi must be simple."""
    dr = derivative_roots(rc, k)
    nk = dr.count
    rows = sensitivity_rows(rc, k, list(range(nk)))
    return SensitivityMatrix(k=k, xi=dr.flat(), matrix=rows)


def sensitivity_fd(
    rc: RootConfiguration, k: int, h: float | None = None
) -> SensitivityMatrix:
    """Central-difference estimate, one distinct root perturbed at a time."""
    if h is None:
        # Balance the O(h^2) truncation error against the roundoff in
        # locating the perturbed derivative roots (about 1e-13 absolute).
        gap = rc.min_gap()
        h = 1e-4 * (gap if gap > 0 else 1.0)
    dr = derivative_roots(rc, k)
    nk = dr.count
    mat = np.empty((nk, rc.q))
    for i in range(rc.q):
        for sign in (+1, -1):
            roots = list(rc.roots)
            roots[i] += sign * h
            if any(roots[a] >= roots[a + 1] for a in range(len(roots) - 1)):
                raise DegenerateError(
                    "perturbation of y_%d by %g collapses the root ordering" % (i + 1, h)
                )
            pert = RootConfiguration(tuple(roots), rc.mults)
            vals = np.array(derivative_roots(pert, k).flat())
            if sign > 0:
                plus = vals
            else:
                minus = vals
        mat[:, i] = (plus - minus) / (2.0 * h)
    return SensitivityMatrix(k=k, xi=dr.flat(), matrix=mat)


def deriv_k1_formula(rc: RootConfiguration, i: int, j: int) -> float:
    """Closed form d(xi_j)/d(x_i) = -P(xi)/((xi - c)^2 P''(xi)) for k = 1.

    Indices are 0-based; x_i must be a simple root of P and xi_j a simple
    root of P' distinct from x_i.
    """
    if rc.mults[i] != 1:
        raise ValueError("x_i must be a simple root")
    c = rc.roots[i]
    dr = derivative_roots(rc, 1)
    flat = dr.flat()
    xi = flat[j]
    mult = dict(dr.distinct)[xi]
    if mult != 1:
        raise NonSimpleRootError("xi_j is not a simple root of P'")
    if xi == c:
        raise ValueError("xi_j must differ from x_i")
    p = poly_from_roots(rc)
    p2 = np.polyder(np.polyder(p))
    return -np.polyval(p, xi) / ((xi - c) ** 2 * np.polyval(p2, xi))


@dataclass(frozen=True)
class LemmaCheck:
    name: str
    passed: bool
    residual: float


def lemma_report(rc: RootConfiguration, k: int) -> list[LemmaCheck]:
    """Numerical check of the sign, bound and sum identities of the
    sensitivity matrix at one configuration."""
    n = rc.degree
    s = sensitivity_matrix(rc, k)
    mat = s.matrix
    checks = []

    # (a) signs: all entries >= 0; > 0 unless xi is a root of P of
    # multiplicity >= k+1 different from y_i (zero case), or equal to it
    # (entry exactly 1).
    dr = derivative_roots(rc, k)
    flat = dr.flat()
    mult_at = {y: m for y, m in zip(rc.roots, rc.mults)}
    worst_sign = 0.0
    sign_ok = True
    for j, xi in enumerate(flat):
        deep = mult_at.get(xi, 0) >= k + 1
        for i, y in enumerate(rc.roots):
            v = mat[j, i]
            if deep:
                target = 1.0 if xi == y else 0.0
                resid = abs(v - target)
                worst_sign = max(worst_sign, resid)
                if resid > 1e-8:
                    sign_ok = False
            else:
                if v <= 0:
                    sign_ok = False
                    worst_sign = max(worst_sign, -v)
    checks.append(LemmaCheck("entry-signs", sign_ok, worst_sign))

    # (b) column sums: m_i (n-k)/n, which is (n-k)/n in the strict case.
    col_target = np.array(rc.mults) * (n - k) / n
    col_resid = float(np.max(np.abs(s.col_sums() - col_target)))
    checks.append(LemmaCheck("column-sums", col_resid <= 1e-8, col_resid))

    # (c) row sums: shifting every root at speed 1 shifts every xi at speed 1.
    row_resid = float(np.max(np.abs(s.row_sums() - 1.0)))
    checks.append(LemmaCheck("row-sums", row_resid <= 1e-8, row_resid))

    # (d) entrywise bound (n-k)/n per unit of multiplicity (the folded entry
    # of a carried root is exactly 1 = m_i * (1/m_i)); strict for strictly
    # hyperbolic configurations with n-k >= 2.
    bound = (n - k) / n
    per_unit = mat / np.array(rc.mults)
    strictly = all(m == 1 for m in rc.mults)
    excess = float(np.max(per_unit) - bound)
    if strictly and n - k >= 2:
        checks.append(LemmaCheck("entry-bound", excess < 0, excess))
    else:
        checks.append(LemmaCheck("entry-bound", excess <= 1e-8, excess))
    return checks


@dataclass(frozen=True)
class TransversalityCertificate:
    jacobian: np.ndarray
    dominance_margin: float
    equalities: tuple[tuple[int, int, int], ...]  # (root index, order k, xi index)

    @property
    def valid(self) -> bool:
        return len(self.equalities) == 0 or self.dominance_margin > 0


def transversality_jacobian(
    rc: RootConfiguration, equalities: list[tuple[int, int, int]]
) -> TransversalityCertificate:
    """Jacobian of the active equalities y_i = xi_j^(k_i) over the constrained
    roots, with its diagonal-dominance margin.

    Each equality is (root index i, derivative order k_i, flat xi index j),
    all 0-based; it must be active at rc within ACTIVE_EQUALITY_TOL.
    """
    s = len(equalities)
    if s == 0:
        return TransversalityCertificate(np.zeros((0, 0)), float("inf"), ())
    root_idx = [i for i, _, _ in equalities]
    if len(set(root_idx)) != s:
        raise ValueError("equalities must constrain distinct roots")
    jac = np.empty((s, s))
    for r, (i, ki, j) in enumerate(equalities):
        flat = derivative_roots(rc, ki).flat()
        if abs(rc.roots[i] - flat[j]) >= ACTIVE_EQUALITY_TOL:
            raise ValueError(
                "equality y_%d = xi_%d^(%d) inactive: |%.17g - %.17g| >= %g"
                % (i + 1, j + 1, ki, rc.roots[i], flat[j], ACTIVE_EQUALITY_TOL)
            )
        row = sensitivity_rows(rc, ki, [j])[0]
        for c, ic in enumerate(root_idx):
            jac[r, c] = (1.0 if ic == i else 0.0) - row[ic]
    margin = float(
        min(
            abs(jac[r, r]) - sum(abs(jac[r, c]) for c in range(s) if c != r)
            for r in range(s)
        )
    )
    return TransversalityCertificate(jac, margin, tuple(equalities))


def refine_equality_point(
    rc: RootConfiguration,
    equalities: list[tuple[int, int, int]],
    max_iter: int = 60,
) -> RootConfiguration:
    """Move the constrained roots of rc until each equality y_i = xi_j^(k_i)
    holds to machine precision (Newton on the dominance Jacobian).

    The starting configuration must already place each target xi at the
    intended flat index; mixed derivative orders are allowed.
    """
    y = np.array(rc.roots)
    idx = [i for i, _, _ in equalities]
    for _ in range(max_iter):
        cur = RootConfiguration(tuple(y), rc.mults)
        res = np.empty(len(equalities))
        jac = np.empty((len(equalities), len(equalities)))
        for r, (i, ki, j) in enumerate(equalities):
            flat = derivative_roots(cur, ki).flat()
            res[r] = y[i] - flat[j]
            row = sensitivity_rows(cur, ki, [j])[0]
            for c, ic in enumerate(idx):
                jac[r, c] = (1.0 if ic == i else 0.0) - row[ic]
        if np.max(np.abs(res)) < 1e-13:
            return cur
        step = np.linalg.solve(jac, -res)
        damp = 1.0
        while damp > 1e-6:
            trial = y.copy()
            trial[idx] += damp * step
            if np.all(np.diff(trial) > 1e-12):
                break
            damp *= 0.5
        y[idx] += damp * step
    raise DegenerateError("equality refinement did not converge")
