"""Enumeration of admissible CVs, the adjacency poset and dim-0 points."""

import numpy as np
import pytest

from rootstrata import configvec as cvm
from rootstrata.configvec import parse_cv
from rootstrata.polycore import RootConfiguration, derivative_roots
from rootstrata.sampling import random_config
from rootstrata.strata import (
    build_poset,
    enumerate_cvs,
    expansions,
    zero_dim_point,
)


def _dim_histogram(cvs):
    hist = {}
    for cv in cvs:
        d = cvm.dimension(cv).conv_dim
        hist[d] = hist.get(d, 0) + 1
    return hist


def test_enumerate_n3_k2_golden():
    cvs = enumerate_cvs(3, 2)
    assert len(cvs) == 6
    assert _dim_histogram(cvs) == {-1: 1, 0: 3, 1: 2}
    names = {str(cv) for cv in cvs}
    assert names == {"(3)", "(1,1_a,1)", "(2,a,1)", "(1,a,2)", "(1,a,1,1)", "(1,1,a,1)"}


def test_enumerate_n2_k1():
    assert {str(cv) for cv in enumerate_cvs(2, 1)} == {"(2)", "(1,a,1)"}


def test_enumerate_dim_filter_contains_example():
    names = {str(cv) for cv in enumerate_cvs(8, 3, dim_filter=1)}
    assert "(1,a,1,2_a,a,a,4)" in names


def test_enumerate_all_admissible_and_sorted():
    cvs = enumerate_cvs(5, 2)
    assert all(cvm.is_admissible(cv) for cv in cvs)
    keys = [(cvm.dimension(cv).conv_dim, str(cv)) for cv in cvs]
    assert keys == sorted(keys)


def test_enumerate_k_range():
    with pytest.raises(ValueError):
        enumerate_cvs(3, 3)


def test_enumeration_closed_under_sampling():
    known = {str(cv) for cv in enumerate_cvs(4, 2)}
    rng = np.random.default_rng(3)
    for _ in range(300):
        rc = random_config(rng, 4)
        assert str(cvm.classify(rc, 2)) in known


def test_expansions_raise_dimension_by_one():
    for cv in enumerate_cvs(5, 3):
        d = cvm.dimension(cv).conv_dim
        for up in expansions(cv):
            assert cvm.is_admissible(up)
            assert cvm.dimension(up).conv_dim == d + 1


def test_expansions_golden_dim0():
    # The dim-0 stratum (1,1_a,1) opens up by detaching the derivative root
    # to either side of the middle root.
    ups = {str(cv) for cv in expansions(parse_cv("(1,1_a,1)", 3, 2))}
    assert ups == {"(1,a,1,1)", "(1,1,a,1)"}


def test_poset_structure():
    poset = build_poset(4, 2)
    top = max(poset.dims)
    for i in range(len(poset.nodes)):
        if poset.dims[i] < top:
            assert poset.out_edges(i), str(poset.nodes[i])
    for a, b in poset.edges:
        assert poset.dims[b] == poset.dims[a] + 1
    i = poset.index_of(parse_cv("(1,1_a,1,a,1)", 4, 2))
    assert poset.dims[i] == 1


def test_poset_to_dot():
    poset = build_poset(3, 2)
    dot = poset.to_dot()
    assert dot.startswith("digraph strata {")
    assert dot.count("->") == len(poset.edges)
    assert 'label="(3)"' in dot


def test_zero_dim_point_q2():
    rc = zero_dim_point(parse_cv("(2,a,1)", 3, 2))
    assert rc.roots == (0.0, 1.0)
    assert rc.mults == (2, 1)


def test_zero_dim_point_interior_binding():
    cv = parse_cv("(1,1_a,1)", 3, 2)
    rc = zero_dim_point(cv)
    assert np.allclose(rc.roots, (0.0, 0.5, 1.0), atol=1e-12)
    # The bound derivative root sits on the middle root to machine precision.
    xs = derivative_roots(rc, 2).flat()
    assert abs(xs[0] - rc.roots[1]) < 1e-12
    assert str(cvm.classify(rc, 2)) == str(cv)


def test_zero_dim_point_matches_retraction_endpoints():
    from rootstrata.flow import retract
    from rootstrata.polycore import gamma_normalize
    from rootstrata.sampling import random_strict

    rng = np.random.default_rng(6)
    for n, k in ((4, 2), (5, 3)):
        cv, endpoint = retract(gamma_normalize(random_strict(rng, n)), k)[-1]
        rc = zero_dim_point(cv)
        assert str(cvm.classify(rc, k)) == str(cv)
        assert np.allclose(rc.roots, endpoint.roots, atol=1e-7)


def test_zero_dim_point_unrealizable_cv():
    # (1,a,1_a,3) for n=5, k=3 satisfies the Rolle chain but no hyperbolic
    # polynomial realizes it: the second root of P''' stays strictly above
    # the middle root.  The solver reports failure instead of fabricating
    # a point.
    from rootstrata.strata import NewtonFailure

    with pytest.raises(NewtonFailure):
        zero_dim_point(parse_cv("(1,a,1_a,3)", 5, 3))


def test_zero_dim_point_rejects_positive_dim():
    with pytest.raises(ValueError):
        zero_dim_point(parse_cv("(1,a,1,1)", 3, 2))
