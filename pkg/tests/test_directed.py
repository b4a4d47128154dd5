import pytest

from lrperc.coupling import Containment, compute_q, containment_sweep
from lrperc.directed import (
    directed_coupling,
    directed_explore,
    directed_kernel,
    forward_field,
    oriented_kernel,
    oriented_square_lattice,
    perturb_orbit,
)
from lrperc.errors import KernelError
from lrperc.exploration import Termination
from lrperc.lattice import SpaceTimeBox, nearest_neighbour
from lrperc.marks import MarkField
from lrperc.montecarlo import simulate
from lrperc.oracle import bfs_cluster

O = (0, 0)


def test_oriented_kernel_layout():
    K = oriented_square_lattice(0.7)
    assert K.directed
    assert K.value((1, 1)) == 0.7 and K.value((-1, 1)) == 0.7
    assert K.value((1, -1)) == 0.0


def test_oriented_kernel_dimension_check():
    with pytest.raises(KernelError):
        oriented_kernel(1, {(1, 0): 0.5})


def test_closed_out_edges_give_trivial_cluster(pinned):
    K = oriented_square_lattice(0.7)
    marks = pinned(directed=True, u={(O, (1, 1)): 0.9, (O, (-1, 1)): 0.9})
    res = directed_explore(K, None, 0.0, 4, marks)
    assert res.discovered == {O}
    assert res.termination is Termination.EXHAUSTED


@pytest.mark.parametrize("n", [1, 3, 6])
def test_fully_open_reaches_final_time(n):
    K = oriented_square_lattice(1.0)
    assert directed_explore(K, None, 0.0, n, forward_field(0)).termination is Termination.REACHED_T


@pytest.mark.parametrize("kernel", [
    oriented_square_lattice(0.6),
    oriented_kernel(1, {(-1,): 0.4, (0,): 0.3, (2,): 0.2}),
    directed_kernel(2, {(1, 0): 0.5, (0, 1): 0.4, (-1, -1): 0.3}),
])
def test_unperturbed_equals_forward_bfs(kernel):
    for s in range(200):
        f = forward_field(s)
        res = directed_explore(kernel, None, 0.0, 5, f, stop_at_T=False)
        assert res.discovered == bfs_cluster(kernel, 5, f).vertices


def test_forward_cluster_is_time_layered():
    K = oriented_kernel(1, {(-1,): 0.5, (1,): 0.5})
    for s in range(200):
        c = bfs_cluster(K, 6, forward_field(s)).vertices
        for v in c:
            assert v[1] >= 0
            if v != O:
                assert any((v[0] - dx, v[1] - 1) in c for dx in (-1, 1))


def test_forward_reachability_monotone_in_kernel():
    small, big = oriented_square_lattice(0.55), oriented_square_lattice(0.7)
    for s in range(200):
        f = MarkField(s, directed=True)
        assert bfs_cluster(small, 6, f).vertices <= bfs_cluster(big, 6, f).vertices
    a, _ = simulate(small, 8, range(2000), structure=big)
    b, _ = simulate(big, 8, range(2000))
    assert not (a & ~b).any()


def test_oriented_region_is_box():
    res = directed_explore(oriented_square_lattice(0.7), None, 0.0, 3, forward_field(1))
    assert isinstance(res.region, SpaceTimeBox)


def test_undirected_kernel_rejected():
    with pytest.raises(KernelError):
        directed_explore(nearest_neighbour(2, 0.5), None, 0.0, 2, MarkField(0))


def test_containment_oriented():
    D = oriented_square_lattice(0.7)
    Dp = perturb_orbit(D, [(1, 1)], 0.55)
    r = containment_sweep(D, Dp, 6, range(3000), assert_level="lemma-checks")
    assert r["counts"]["violated"] == 0
    assert r["counts"]["holds"] > 0


def test_both_orbits_removed():
    D = oriented_square_lattice(0.7)
    Dp = perturb_orbit(D, [(1, 1), (-1, 1)], 0.0)
    for s in range(100):
        sample, verdict = directed_coupling(D, Dp, 4, s)
        assert sample.cluster_prime == {O}
        assert verdict is not Containment.VIOLATED
        if sample.termination is not Termination.REACHED_T:
            assert verdict is Containment.HOLDS


def test_reached_boundary_not_applicable():
    D = oriented_square_lattice(0.95)
    Dp = perturb_orbit(D, [(1, 1)], 0.5)
    params = compute_q(D, Dp)
    verdicts = {directed_coupling(D, Dp, 3, s, params=params)[1] for s in range(30)}
    assert Containment.NOT_APPLICABLE in verdicts
    assert Containment.VIOLATED not in verdicts
