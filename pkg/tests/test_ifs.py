"""Geometry layer: validation, direction sets, classification, coding.

The direction-set solver is checked against a brute-force grid scan over
the probability simplex, and the projection coding against direct mass
accounting.
"""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spongedim import DiagonalIFS, DiagonalMap
from spongedim.ifs import (build_projection_coding, classify,
                           compare_projections, feasible_direction_sets,
                           validate_ifs)

from conftest import carpet


# === validation ===

def test_validate_accepts_carpet(mcmullen):
    rep = validate_ifs(mcmullen)
    assert rep.ok
    assert rep.violations == []


def test_validate_rejects_overlap():
    bad = DiagonalIFS([DiagonalMap([0.6, 0.5], [0.0, 0.0]),
                       DiagonalMap([0.6, 0.5], [0.2, 0.0])])
    rep = validate_ifs(bad)
    assert not rep.ok
    assert rep.violations


def test_escape_rejected_at_construction():
    # a cell leaving the unit cube never produces a valid system
    with pytest.raises(ValueError):
        DiagonalIFS([DiagonalMap([0.3, 0.3], [0.0, 0.0]),
                     DiagonalMap([0.5, 0.5], [0.7, 0.0])])


def test_degenerate_ratio_rejected():
    with pytest.raises(ValueError):
        DiagonalMap([0.0, 0.5], [0.0, 0.0])
    with pytest.raises(ValueError):
        DiagonalMap([1.0, 0.5], [0.0, 0.0])


# === direction sets ===

def brute_force_direction_sets(ifs, res=100):
    """Grid scan of the simplex: collect {k : chi_k(p) <= x} over all p, x."""
    found = set()
    n, d = ifs.n, ifs.d
    grid = [w for w in itertools.product(range(res + 1), repeat=n)
            if sum(w) == res]
    for w in grid:
        p = np.array(w, dtype=float) / res
        chi = -(p @ np.log(ifs.A))
        order = np.sort(chi)
        for x in order:
            found.add(frozenset(np.flatnonzero(chi <= x + 1e-12)))
    found.discard(frozenset())
    return found


@pytest.mark.parametrize("maps", [
    [([1 / 2, 1 / 4], [0, 0]), ([1 / 4, 1 / 2], [1 / 2, 1 / 2])],
    [([1 / 3, 1 / 2], [0, 0]), ([1 / 3, 1 / 2], [2 / 3, 0]),
     ([1 / 3, 1 / 2], [1 / 3, 1 / 2])],
    [([1 / 2, 1 / 5], [0, 0]), ([1 / 3, 1 / 2], [1 / 2, 1 / 2])],
])
def test_direction_sets_match_grid_scan_d2(maps):
    ifs = DiagonalIFS([DiagonalMap(a, t) for a, t in maps])
    lp = {fs.axes for fs in feasible_direction_sets(ifs)}
    assert lp == brute_force_direction_sets(ifs)


def test_direction_sets_match_grid_scan_d3(sponge3d):
    lp = {fs.axes for fs in feasible_direction_sets(sponge3d)}
    assert lp == brute_force_direction_sets(sponge3d, res=60)


def test_direction_sets_order_flip():
    # two maps whose exponent order flips with p: all three sets feasible
    ifs = DiagonalIFS([DiagonalMap([1 / 2, 1 / 4], [0, 0]),
                       DiagonalMap([1 / 4, 1 / 2], [1 / 2, 1 / 2])])
    got = {tuple(sorted(fs.axes)) for fs in feasible_direction_sets(ifs)}
    assert got == {(0,), (1,), (0, 1)}


def test_direction_sets_contain_full_set(mcmullen, sierpinski, sponge3d):
    for ifs in (mcmullen, sierpinski, sponge3d):
        sets = feasible_direction_sets(ifs)
        assert frozenset(range(ifs.d)) in {fs.axes for fs in sets}


# === projection comparison ===

def test_compare_projections_symmetric_reflexive(mcmullen, sponge3d):
    for ifs in (mcmullen, sponge3d):
        for fs in feasible_direction_sets(ifs):
            for i in range(ifs.n):
                assert compare_projections(ifs, i, i, fs.axes) == "exact"
                for j in range(ifs.n):
                    assert (compare_projections(ifs, i, j, fs.axes)
                            == compare_projections(ifs, j, i, fs.axes))


# === classification ===

def test_classify_sierpinski(sierpinski, mcmullen, gl4x2):
    # any selection of cells from one uniform grid lands in the most
    # specific class, whether or not the grid is square
    c = classify(sierpinski)
    assert c.label == "sierpinski"
    assert c.conformal
    assert c.grid == (3, 3)
    c = classify(mcmullen)
    assert c.label == "sierpinski"
    assert not c.conformal
    assert c.grid == (3, 2)
    assert classify(gl4x2).grid == (4, 2)


def test_classify_gatzouras_lalley():
    # unequal column widths break the uniform grid but keep the ordered
    # column structure
    ifs = DiagonalIFS([DiagonalMap([0.3, 0.5], [0.0, 0.0]),
                       DiagonalMap([0.45, 0.5], [0.3, 0.0]),
                       DiagonalMap([0.3, 0.5], [0.2, 0.5])])
    c = classify(ifs)
    assert c.label == "gatzouras-lalley"
    assert not c.sierpinski
    assert c.gl_order is not None


def test_classify_baranski():
    # disjoint on each single axis, but the ratio order flips between
    # the maps so no common ordering exists
    ifs = DiagonalIFS([DiagonalMap([1 / 2, 1 / 4], [0, 0]),
                       DiagonalMap([1 / 4, 1 / 2], [1 / 2, 1 / 2])])
    c = classify(ifs)
    assert c.label == "baranski"
    assert not c.gatzouras_lalley


def test_classify_not_good():
    # overlapping side projections that are neither exact nor disjoint
    ifs = DiagonalIFS([DiagonalMap([0.4, 0.3], [0.0, 0.0]),
                       DiagonalMap([0.4, 0.3], [0.3, 0.7])])
    c = classify(ifs)
    assert c.label == "not-good"
    assert c.failures


def test_classify_good_sponge_flags(sponge3d):
    c = classify(sponge3d)
    assert c.good_sponge
    assert c.label != "not-good"


# === projection coding ===

def test_coding_classes_partition_letters(mcmullen, sponge3d):
    for ifs, p in ((mcmullen, [0.4, 0.35, 0.25]),
                   (sponge3d, [0.3, 0.3, 0.2, 0.2])):
        from spongedim.engine import stable_chain
        groups, chain, chi, refN = stable_chain(ifs, np.asarray(p))
        coding = build_projection_coding(ifs, chain)
        for r in range(1, coding.levels + 1):
            reps = coding.reps[r - 1]
            seen = sorted(x for f in coding.fibers[r - 1] for x in f)
            assert seen == list(range(ifs.n))
            assert len(reps) == coding.n_classes(r)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=25, deadline=None)
def test_coding_projection_conserves_mass(seed):
    ifs = carpet((1 / 3, 1 / 2), [(0, 0), (2 / 3, 0), (1 / 3, 1 / 2)])
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(3))
    from spongedim.engine import stable_chain
    groups, chain, chi, refN = stable_chain(ifs, p)
    coding = build_projection_coding(ifs, chain)
    for r in range(1, coding.levels + 1):
        q = coding.project_vector(p, r)
        assert q.min() >= 0
        assert abs(q.sum() - 1.0) < 1e-12
