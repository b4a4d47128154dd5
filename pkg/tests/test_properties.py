"""Randomised invariants over table kernels drawn by hypothesis."""
import math

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from lrperc.coupling import Containment, check_containment, compute_q, realize_coupled
from lrperc.exploration import Status, run
from lrperc.lattice import (
    TableKernel,
    ball,
    delta_of,
    edge_key,
    is_positive,
    kernel_value,
    override,
    potential_edges,
    survival_product_bounds,
    tail_open_probability,
)
from lrperc.marks import Channel, MarkField
from lrperc.montecarlo import simulate
from lrperc.oracle import bfs_cluster, enumerate_exact

SETTINGS = settings(max_examples=60, deadline=None,
                    suppress_health_check=[HealthCheck.too_slow])

prob = st.floats(0.05, 0.95)


@st.composite
def displacements(draw, d, radius=2):
    z = tuple(draw(st.lists(st.integers(-radius, radius), min_size=d, max_size=d)))
    assume(any(z))
    return z if is_positive(z) else tuple(-c for c in z)


@st.composite
def table_kernels(draw, d=None, max_entries=4, lo=0.05, hi=0.95):
    d = d or draw(st.integers(1, 2))
    zs = draw(st.lists(displacements(d), min_size=1, max_size=max_entries, unique=True))
    table = {z: draw(st.floats(lo, hi)) for z in zs}
    return TableKernel.from_mapping(d, table)


@st.composite
def perturbed_pairs(draw, d=None):
    J = draw(table_kernels(d))
    support = sorted(z for z, _ in J.entries if is_positive(z))
    chosen = draw(st.lists(st.sampled_from(support), min_size=1, unique=True))
    factors = {z: draw(st.floats(0.0, 0.9)) for z in chosen}
    Jp = override(J, {z: J.value(z) * f for z, f in factors.items()})
    return J, Jp


# --- lattice ------------------------------------------------------------------------


@SETTINGS
@given(table_kernels(), st.data())
def test_undirected_symmetry(K, data):
    z = data.draw(displacements(K.d, 3))
    assert kernel_value(K, z) == kernel_value(K, tuple(-c for c in z))


@given(st.integers(1, 3), st.integers(0, 6))
def test_balls_nested(d, n):
    assert set(ball(d, n)) <= set(ball(d, n + 1))
    if d == 2:
        assert len(ball(2, n)) == 2 * n * n + 2 * n + 1


@SETTINGS
@given(table_kernels(), st.integers(0, 4))
def test_potential_edges_stable_without_reversals(K, n):
    a = potential_edges(K, n)
    assert a == potential_edges(K, n)
    assert len(set(a)) == len(a)
    assert all(edge_key(x, y) == (x, y) for x, y in a)


@SETTINGS
@given(table_kernels(), st.integers(0, 4))
def test_tail_nonincreasing_in_radius(K, n):
    o = (0,) * K.d
    assert tail_open_probability(K, o, n + 1) <= tail_open_probability(K, o, n) + 1e-15


@SETTINGS
@given(table_kernels(), st.floats(1.0, 3.0), st.integers(0, 3))
def test_tail_nondecreasing_in_kernel(K, factor, n):
    from lrperc.lattice import ScaledKernel

    bigger = ScaledKernel(K, factor)
    for v in ball(K.d, n):
        assert tail_open_probability(K, v, n) <= tail_open_probability(bigger, v, n) + 1e-15


@SETTINGS
@given(perturbed_pairs())
def test_survival_bounds_bracket_exact_product(pair):
    J, Jp = pair
    delta = delta_of(J, Jp)
    exact = math.prod(1 - p for z, p in J.entries if z not in delta)
    lo, hi, _ = survival_product_bounds(J, delta)
    assert lo <= exact * (1 + 1e-12) and exact <= hi * (1 + 1e-12)
    assert lo > 0


# --- marks ------------------------------------------------------------------------------


@SETTINGS
@given(st.integers(0, 2**64 - 1), st.permutations(range(12)))
def test_marks_independent_of_query_order(seed, order):
    edges = [((i,), (i + 1,)) for i in range(12)]
    first = [MarkField(seed).u(e) for e in edges]
    f = MarkField(seed)
    shuffled = {}
    for i in order:
        shuffled[i] = f.u(edges[i])
    assert [shuffled[i] for i in range(12)] == first


@SETTINGS
@given(st.integers(0, 2**32), st.sampled_from(list(Channel)), st.sampled_from(list(Channel)))
def test_channel_separation(seed, a, b):
    assume(a != b)
    e = ((0, 0), (1, 0))
    f = MarkField(seed)
    before = f.mark(e, a)
    for i in range(5):
        f.mark(((i, 1), (i, 2)), b)
    assert f.mark(e, a) == before
    assert f.mark(e, a) != f.mark(e, b)


# --- exploration ----------------------------------------------------------------------------


@SETTINGS
@given(perturbed_pairs(), st.floats(0.0, 1.0), st.integers(0, 5), st.integers(0, 10**6))
def test_lemma_checks_hold(pair, q, n, seed):
    J, Jp = pair
    res = run(J, delta_of(J, Jp), q, n, MarkField(seed), assert_level="full-trace",
              stop_at_T=False)
    assert not (res.A & res.B)
    assert len(res.edges_with(Status.OPEN_H)) == len(res.cluster_h()) - 1


@SETTINGS
@given(table_kernels(), st.floats(0.0, 1.0), st.integers(0, 5), st.integers(0, 10**6))
def test_unperturbed_exploration_is_bfs(K, q, n, seed):
    f = MarkField(seed)
    res = run(K, None, q, n, f, stop_at_T=False)
    assert res.discovered == bfs_cluster(K, n, f).vertices


@SETTINGS
@given(perturbed_pairs(), st.integers(1, 4), st.integers(0, 10**6))
def test_q_one_stays_off_delta(pair, n, seed):
    J, Jp = pair
    delta = delta_of(J, Jp)
    f = MarkField(seed)
    res = run(J, delta, 1.0, n, f, stop_at_T=False)
    cut = override(J, {z: 0.0 for z in delta})
    assert res.cluster_h() <= bfs_cluster(cut, n, f).vertices


# --- coupling ------------------------------------------------------------------------------


@SETTINGS
@given(perturbed_pairs(), st.integers(1, 5), st.integers(0, 10**6),
       st.sampled_from(["pointwise", "exact_marginal"]))
def test_containment_never_violated(pair, n, seed, mode):
    J, Jp = pair
    sample = realize_coupled(J, Jp, n, seed, mode=mode, assert_level="lemma-checks")
    assert check_containment(sample) is not Containment.VIOLATED
    if mode == "pointwise":
        assert sample.cluster_prime <= sample.cluster_star


@SETTINGS
@given(perturbed_pairs())
def test_parameter_inequality(pair):
    J, Jp = pair
    c = compute_q(J, Jp)
    assert 0 <= c.q <= 1 and abs(c.p + c.q - 1) < 1e-15
    for z in c.delta:
        # absolute slack: 1 - cbrt(J'/J) rounds to 1 when J'/J is tiny
        assert J.value(z) * (1 - c.q) ** 3 >= Jp.value(z) - 1e-12 * J.value(z)


@SETTINGS
@given(perturbed_pairs(), st.floats(0.0, 1.0))
def test_q_monotone_in_gap(pair, shrink):
    J, Jp = pair
    delta = delta_of(J, Jp)
    smaller = override(J, {z: Jp.value(z) * shrink for z in delta})
    assert compute_q(J, smaller).q >= compute_q(J, Jp).q - 1e-15


# --- oracle and Monte Carlo ------------------------------------------------------------------


@SETTINGS
@given(table_kernels(d=1, max_entries=2), st.integers(0, 2))
def test_exact_distribution_normalised(K, n):
    d = enumerate_exact(K, n, "cluster")
    assert abs(d.total() - 1) <= 1e-12
    assert all(p >= 0 for _, p in d.support)


@settings(max_examples=25, deadline=None)
@given(table_kernels(), st.floats(1.0, 2.5), st.integers(1, 6))
def test_replicas_monotone_in_kernel(K, factor, n):
    from lrperc.lattice import ScaledKernel

    big = ScaledKernel(K, factor)
    a, sa = simulate(K, n, range(300), structure=K, stop_at_T=False)
    b, sb = simulate(big, n, range(300), structure=K, stop_at_T=False)
    assert not np.any(a & ~b)
    assert np.all(sa <= sb)
