"""Scale decomposition: generation clocks and axis grouping.

The clock gamma_k(N) is pinned by its defining two-sided inequality and
the decomposition is checked for structural invariants on random
schedules.
"""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from spongedim import DiagonalIFS, DiagonalMap
from spongedim.ifs import feasible_direction_sets
from spongedim.scales import PrefixTable, decompose, gamma
from spongedim.weights import WeightSequence

from conftest import carpet


def random_instance(seed, horizon=400):
    rng = np.random.default_rng(seed)
    ifs = carpet((1 / 3, 1 / 2), [(0, 0), (2 / 3, 0), (1 / 3, 1 / 2)])
    P = rng.dirichlet(np.full(3, rng.uniform(0.5, 3.0)), size=horizon)
    alpha = rng.uniform(0.6, 1.0, size=3)
    return ifs, WeightSequence(P=P, alpha=alpha), rng


# === the clock ===

@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=40, deadline=None)
def test_gamma_two_sided_inequality(seed):
    ifs, seq, rng = random_instance(seed)
    table = PrefixTable(ifs, seq)
    chi = seq.p_rows() @ ifs.C
    for _ in range(4):
        N = float(rng.uniform(5.0, 120.0))
        for k in range(ifs.d):
            g = gamma(table, N, k)
            pre = float(np.sum(chi[: g - 1, k]))
            assert pre <= N < pre + chi[g - 1, k]


def test_gamma_monotone_in_N():
    ifs, seq, _ = random_instance(11)
    table = PrefixTable(ifs, seq)
    for k in range(ifs.d):
        gs = [gamma(table, N, k) for N in np.linspace(2.0, 150.0, 60)]
        assert all(a <= b for a, b in zip(gs, gs[1:]))


# === the decomposition ===

@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=25, deadline=None)
def test_decomposition_structure(seed):
    ifs, seq, rng = random_instance(seed)
    N = float(rng.uniform(10.0, 120.0))
    dec = decompose(ifs, seq, N)
    info = dec.as_dict()
    # axis groups partition {1..d}, first group holds the slowest axes
    seen = sorted(a for grp in info["A"] for a in grp)
    assert seen == list(range(1, ifs.d + 1))
    # generation cuts are nondecreasing and the last one closes the scale
    assert all(a <= b for a, b in zip(info["g"], info["g"][1:]))
    assert info["s"] == len(info["A"]) == len(info["g"])
    assert info["N"] == N


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=15, deadline=None)
def test_decomposition_chain_sets_feasible(seed):
    # the nested direction sets D_1 superset ... superset D_s are all
    # feasible, and D_1 is the full axis set
    ifs, seq, rng = random_instance(seed)
    N = float(rng.uniform(10.0, 120.0))
    dec = decompose(ifs, seq, N)
    feas = {fs.axes for fs in feasible_direction_sets(ifs)}
    assert dec.chain[0] == frozenset(range(ifs.d))
    for hi, lo in zip(dec.chain, dec.chain[1:]):
        assert lo < hi
    for D in dec.chain:
        assert frozenset(D) in feas


def test_conformal_collapses_to_one_group():
    cells = [(i / 3, j / 3) for j in range(3) for i in range(3)
             if not (i == 1 and j == 1)]
    ifs = carpet((1 / 3, 1 / 3), cells)
    seq = WeightSequence(P=np.full((300, 8), 1 / 8), alpha=np.full(8, 0.9))
    dec = decompose(ifs, seq, 40.0)
    info = dec.as_dict()
    assert info["s"] == 1
    assert info["A"] == [[1, 2]]
