import math

import numpy as np
import pytest

from lrperc.errors import BracketingError, EmptyDeltaError, FitError, ValidationError
from lrperc.lattice import PolynomialPhiKernel, ScaledKernel, TableKernel, nearest_neighbour, override
from lrperc.marks import MarkField
from lrperc.montecarlo import (
    bisect_beta_c,
    bisect_parameter,
    estimate_decay,
    estimate_susceptibility,
    estimate_theta,
    monotonicity_experiment,
    phi_kernel,
    simulate,
)
from lrperc.oracle import bfs_cluster

NN2 = {(1, 0): 1.0, (0, 1): 1.0}


# --- compiled growth agrees with the reference BFS --------------------------------------


@pytest.mark.parametrize("kernel,n", [
    (nearest_neighbour(2, 0.5), 6),
    (PolynomialPhiKernel(1, 0.8, 2.5), 6),
    (TableKernel.from_mapping(2, {(1, 0): 0.3, (1, 1): 0.2, (0, 2): 0.1}), 5),
])
def test_compiled_growth_matches_bfs(kernel, n):
    seeds = range(100, 250)
    reached, sizes = simulate(kernel, n, seeds, stop_at_T=False)
    for s, r, size in zip(seeds, reached, sizes):
        b = bfs_cluster(kernel, n, MarkField(s))
        assert size == len(b.vertices)
        assert bool(r) == b.reaches_T


# --- theta --------------------------------------------------------------------------------


def test_theta_zero_kernel():
    r = estimate_theta(nearest_neighbour(2, 0.0), 5, 500)
    assert r.estimate == 0.0 and r.stderr == 0.0


def test_theta_full_kernel():
    assert estimate_theta(nearest_neighbour(2, 1.0), 5, 200).estimate == 1.0


def test_theta_near_criticality_is_nondegenerate():
    r = estimate_theta(nearest_neighbour(2, 0.5), 32, 10_000)
    assert 0.1 < r.estimate < 0.9


@pytest.mark.parametrize("n", [1, 3, 5])
def test_theta_line_closed_form(n):
    # each side needs its n edges plus the one leaving the ball
    rho = 0.5
    exact = 1 - (1 - rho ** (n + 1)) ** 2
    r = estimate_theta(nearest_neighbour(1, rho), n, 20_000, seed0=7)
    assert abs(r.estimate - exact) <= 4 * math.sqrt(exact * (1 - exact) / 20_000)


def test_theta_pathwise_monotone_in_kernel():
    small, big = nearest_neighbour(2, 0.4), nearest_neighbour(2, 0.55)
    a, _ = simulate(small, 8, range(3000), structure=big)
    b, _ = simulate(big, 8, range(3000))
    assert not np.any(a & ~b)


def test_report_reproducible():
    a = estimate_theta(nearest_neighbour(2, 0.5), 8, 1000, seed0=3)
    b = estimate_theta(nearest_neighbour(2, 0.5), 8, 1000, seed0=3)
    assert a.as_dict() == b.as_dict()
    assert a.digest != estimate_theta(nearest_neighbour(2, 0.5), 8, 1000, seed0=4).digest


def test_rejects_zero_replicas():
    with pytest.raises(ValidationError):
        estimate_theta(nearest_neighbour(2, 0.5), 8, 0)


# --- susceptibility -------------------------------------------------------------------------


def test_susceptibility_zero_kernel():
    r = estimate_susceptibility(nearest_neighbour(2, 0.0), 4, 100)
    assert r.estimate == 1.0 and r.stderr == 0.0


def test_susceptibility_two_fair_edges():
    r = estimate_susceptibility(nearest_neighbour(1, 0.5), 1, 20_000)
    assert abs(r.estimate - 2.0) <= 4 * r.stderr


def test_cluster_size_monotone_in_radius():
    J = nearest_neighbour(2, 0.45)
    prev = None
    for n in (2, 4, 6, 8):
        _, sizes = simulate(J, n, range(500), stop_at_T=False)
        if prev is not None:
            assert np.all(sizes >= prev)
        prev = sizes


# --- decay --------------------------------------------------------------------------------


def test_decay_zero_kernel_fails():
    with pytest.raises(FitError):
        estimate_decay(nearest_neighbour(2, 0.0), (2, 4, 6), 200)


def test_decay_line_slope():
    fit = estimate_decay(nearest_neighbour(1, 0.5), (2, 4, 6, 8), 40_000)
    assert abs(fit.slope - math.log(0.5)) <= 0.1
    assert fit.r_squared > 0.99


# --- bisection ------------------------------------------------------------------------------


def test_bisection_degenerate_bracket():
    b = bisect_parameter(lambda t: nearest_neighbour(2, t), 4, 10, lo=0.4, hi=0.41, tol=0.1)
    assert b.estimate == pytest.approx(0.405)
    assert b.evaluations == ()


def test_bisection_zero_family():
    with pytest.raises(BracketingError):
        bisect_beta_c(lambda beta: phi_kernel({(1, 0): 0.0, (0, 1): 0.0}, beta), 8, 100)


def test_bisection_small_square_lattice():
    b = bisect_beta_c(lambda beta: phi_kernel(NN2, beta), 12, 2000, tol=1e-3, beta_max=5.0)
    p = -math.expm1(-b.estimate)
    assert 0.35 < p < 0.6
    assert b.bracket[1] - b.bracket[0] <= 1e-3


def test_phi_kernel_values():
    K = phi_kernel(NN2, math.log(2))
    assert K.value((1, 0)) == pytest.approx(0.5)
    assert K.value((0, -1)) == pytest.approx(0.5)


# --- monotonicity experiment ---------------------------------------------------------------


def test_monotonicity_rejects_equal_kernels():
    J = nearest_neighbour(2, 0.3)
    with pytest.raises(EmptyDeltaError):
        monotonicity_experiment(J, J, (8,), 100)


def test_line_inside_plane_separates():
    J = nearest_neighbour(2, 0.3)
    Jp = override(J, {(0, 1): 0.0})
    rep = monotonicity_experiment(J, Jp, (8,), 2000, tol=1e-3)
    row = rep.rows[0]
    assert row.gap > 0
    assert row.z >= 3
    # the line needs every one of the 2n edges of its two arms scaled up more
    assert row.s_Jp.bisection.estimate > 1 / 0.3 * 0.5


def test_scaled_kernel_reuses_structure():
    K = nearest_neighbour(2, 0.3)
    a, _ = simulate(ScaledKernel(K, 1.5), 6, range(300), structure=K)
    b, _ = simulate(nearest_neighbour(2, 0.45), 6, range(300))
    assert np.array_equal(a, b)
