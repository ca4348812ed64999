"""Sensitivity matrices, their identities and transversality certificates."""

import numpy as np
import pytest

from rootstrata.polycore import RootConfiguration, derivative_roots
from rootstrata.sampling import random_strict
from rootstrata.sensitivity import (
    NonSimpleRootError,
    deriv_k1_formula,
    lemma_report,
    refine_equality_point,
    sensitivity_fd,
    sensitivity_matrix,
    sensitivity_rows,
    transversality_jacobian,
)


def test_golden_entry_one_third():
    # Roots (0,1,2), k=1: the derivative of xi_1 w.r.t. the middle root.
    rc = RootConfiguration((0.0, 1.0, 2.0), (1, 1, 1))
    s = sensitivity_matrix(rc, 1)
    assert abs(s.matrix[0][1] - 1.0 / 3.0) < 1e-10
    assert s.matrix.shape == (2, 3)


def test_row_and_column_sums():
    rng = np.random.default_rng(0)
    for _ in range(10):
        n = int(rng.integers(3, 8))
        k = int(rng.integers(1, n))
        rc = random_strict(rng, n)
        s = sensitivity_matrix(rc, k)
        assert np.allclose(s.row_sums(), 1.0, atol=1e-9)
        assert np.allclose(s.col_sums(), (n - k) / n, atol=1e-9)


def test_matches_finite_differences():
    rc = RootConfiguration((0.0, 0.4, 1.1, 2.0), (1, 1, 1, 1))
    for k in (1, 2, 3):
        a = sensitivity_matrix(rc, k).matrix
        f = sensitivity_fd(rc, k).matrix
        assert np.max(np.abs(a - f)) < 1e-7


def test_matches_k1_closed_form():
    rc = RootConfiguration((0.0, 1.0, 2.5), (1, 1, 1))
    s = sensitivity_matrix(rc, 1)
    for i in range(3):
        for j in range(2):
            assert abs(s.matrix[j][i] - deriv_k1_formula(rc, i, j)) < 1e-11


def test_non_simple_row_rejected():
    # x^3 (x-1), k=1: the derivative has a double root at 0.
    rc = RootConfiguration((0.0, 1.0), (3, 1))
    with pytest.raises(NonSimpleRootError):
        sensitivity_rows(rc, 1, [0])
    # The simple root at 3/4 is fine.
    sensitivity_rows(rc, 1, [2])


def test_folded_entries_at_deep_root():
    # A root of multiplicity > k pins its carried derivative roots: the
    # folded entry is exactly 1 there and 0 for the other roots.
    rc = RootConfiguration((0.0, 1.0), (3, 1))
    dr = derivative_roots(rc, 2)
    assert dr.distinct[0] == (0.0, 1)
    row = sensitivity_rows(rc, 2, [0])[0]
    assert row[0] == 1.0 and row[1] == 0.0


def test_lemma_report_strict_case():
    rng = np.random.default_rng(1)
    for _ in range(10):
        n = int(rng.integers(3, 8))
        k = int(rng.integers(1, n))
        rc = random_strict(rng, n)
        for check in lemma_report(rc, k):
            assert check.passed, (check.name, check.residual)


def test_lemma_report_multiple_root_case():
    for check in lemma_report(RootConfiguration((0.0, 1.0), (3, 1)), 2):
        assert check.passed, (check.name, check.residual)


def test_transversality_golden_margin():
    rc = RootConfiguration((0.0, 0.5, 1.0), (1, 1, 1))
    cert = transversality_jacobian(rc, [(1, 2, 0)])
    assert abs(cert.dominance_margin - 2.0 / 3.0) < 1e-10
    assert cert.valid


def test_transversality_rejects_inactive_equality():
    rc = RootConfiguration((0.0, 0.3, 1.0), (1, 1, 1))
    with pytest.raises(ValueError):
        transversality_jacobian(rc, [(1, 2, 0)])


def test_transversality_empty():
    cert = transversality_jacobian(RootConfiguration((0.0, 1.0), (1, 1)), [])
    assert cert.valid and cert.dominance_margin == float("inf")


def test_refine_equality_point_single():
    rc = RootConfiguration((0.0, 0.45, 1.0), (1, 1, 1))
    pt = refine_equality_point(rc, [(1, 2, 0)])
    assert abs(pt.roots[1] - 0.5) < 1e-12
    xs = derivative_roots(pt, 2).flat()
    assert abs(pt.roots[1] - xs[0]) < 1e-12


def test_refine_equality_point_mixed_orders():
    rng = np.random.default_rng(5)
    rc = random_strict(rng, 6)
    eqs = []
    for i, ki in ((1, 2), (3, 3)):
        flat = derivative_roots(rc, ki).flat()
        j = int(np.argmin([abs(x - rc.roots[i]) for x in flat]))
        eqs.append((i, ki, j))
    pt = refine_equality_point(rc, eqs)
    cert = transversality_jacobian(pt, eqs)
    assert cert.valid and cert.dominance_margin > 0
