import math

import pytest

from lrperc.errors import EmptyDeltaError, OrderViolationError, ValidationError, ZeroProductError
from lrperc.lattice import (
    Ball,
    PolynomialPhiKernel,
    ScaledKernel,
    SpaceTimeBox,
    TableKernel,
    ball,
    default_region,
    delta_of,
    kernel_value,
    log_survival_product,
    nearest_neighbour,
    override,
    potential_edges,
    survival_product_bounds,
    tail_open_probability,
)


# --- kernels ------------------------------------------------------------------


def test_table_lookup():
    assert kernel_value(nearest_neighbour(1, 0.5), (1,)) == 0.5


def test_polynomial_phi_zero_beta():
    K = PolynomialPhiKernel(1, 0.0, 3.0)
    assert all(kernel_value(K, (z,)) == 0.0 for z in (1, 2, 7, -40))


def test_polynomial_phi_value():
    K = PolynomialPhiKernel(1, 1.0, 3.0)
    assert kernel_value(K, (2,)) == pytest.approx(0.1175030974, abs=1e-10)
    assert kernel_value(K, (2,)) == pytest.approx(-math.expm1(-1 / 8), rel=1e-15)


def test_undirected_table_is_symmetrised():
    K = TableKernel.from_mapping(2, {(1, 0): 0.2, (2, -1): 0.1})
    assert kernel_value(K, (-1, 0)) == 0.2
    assert kernel_value(K, (-2, 1)) == 0.1


def test_directed_table_is_not_symmetrised():
    K = TableKernel.from_mapping(1, {(1,): 0.2}, directed=True)
    assert kernel_value(K, (-1,)) == 0.0


def test_origin_has_no_self_loop():
    with pytest.raises(ValidationError):
        kernel_value(nearest_neighbour(2, 0.5), (0, 0))


def test_value_outside_unit_interval_rejected():
    with pytest.raises(ValidationError):
        TableKernel.from_mapping(1, {(1,): 1.5})


def test_scaled_kernel_caps_at_one():
    K = ScaledKernel(nearest_neighbour(1, 0.4), 3.0)
    assert kernel_value(K, (1,)) == 1.0
    assert kernel_value(ScaledKernel(nearest_neighbour(1, 0.4), 0.5), (1,)) == pytest.approx(0.2)


# --- regions ------------------------------------------------------------------


def test_ball_radius_zero():
    assert ball(1, 0) == ((0,),)


def test_ball_sizes():
    assert len(ball(2, 1)) == 5
    assert len(ball(2, 3)) == 25


def test_space_time_box():
    box = SpaceTimeBox(1, 2)
    assert len(box.vertices) == 5 * 3
    assert all(0 <= v[-1] <= 2 and abs(v[0]) <= 2 for v in box.vertices)


def test_default_region_depends_on_orientation():
    from lrperc.directed import oriented_square_lattice

    assert isinstance(default_region(nearest_neighbour(2, 0.5), 3), Ball)
    assert isinstance(default_region(oriented_square_lattice(0.5), 3), SpaceTimeBox)


# --- potential edges ----------------------------------------------------------


def test_edges_z1_n1():
    assert potential_edges(nearest_neighbour(1, 0.5), 1) == [((-1,), (0,)), ((0,), (1,))]


def test_edges_z2_n1():
    edges = potential_edges(nearest_neighbour(2, 0.5), 1)
    assert len(edges) == 4
    assert all((0, 0) in e for e in edges)


def test_edges_range_two():
    K = TableKernel.from_mapping(1, {(1,): 0.3, (2,): 0.2})
    # pairs in {-2..2} at distance 1 (4 of them) or 2 (3 of them)
    assert len(potential_edges(K, 2)) == 7


# --- difference set -------------------------------------------------------------


def test_delta_of_nn():
    J = nearest_neighbour(1, 0.5)
    assert set(delta_of(J, override(J, {(1,): 0.25}))) == {(1,), (-1,)}


def test_delta_of_equal_kernels():
    J = nearest_neighbour(1, 0.5)
    with pytest.raises(EmptyDeltaError):
        delta_of(J, J)


def test_delta_of_order_violation():
    J = nearest_neighbour(1, 0.5)
    with pytest.raises(OrderViolationError):
        delta_of(J, override(J, {(1,): 0.6}))


# --- boundary indicator -----------------------------------------------------------


def test_tail_zero_deep_inside():
    assert tail_open_probability(nearest_neighbour(2, 0.5), (0, 0), 5) == 0.0


def test_tail_single_outward_edge():
    assert tail_open_probability(nearest_neighbour(1, 0.5), (3,), 3) == 0.5


def test_tail_corner_of_ball():
    assert tail_open_probability(nearest_neighbour(2, 0.5), (3, 0), 3) == pytest.approx(0.875)


def test_tail_long_range_kernel_is_positive_everywhere():
    K = PolynomialPhiKernel(1, 1.0, 2.5)
    assert 0 < tail_open_probability(K, (0,), 3) < tail_open_probability(K, (3,), 3) < 1


# --- survival product -------------------------------------------------------------


def test_survival_product_empty():
    J = nearest_neighbour(1, 0.5)
    assert log_survival_product(J, {(1,), (-1,)}) == 1.0


def test_survival_product_z2():
    J = nearest_neighbour(2, 0.3)
    assert log_survival_product(J, {(1, 0), (-1, 0)}) == pytest.approx(0.49, abs=1e-15)


def test_survival_product_zero():
    with pytest.raises(ZeroProductError):
        log_survival_product(nearest_neighbour(2, 1.0), {(1, 0), (-1, 0)})


def test_survival_product_bounds_bracket_long_range():
    K = PolynomialPhiKernel(1, 1.0, 3.0)
    lo, hi, _ = survival_product_bounds(K, {(1,), (-1,)})
    # direct product over 1 < |z| <= 10^5 plus an integral tail estimate
    direct = math.exp(sum(2 * math.log1p(math.expm1(-(z ** -3.0))) for z in range(2, 100_001)))
    assert lo <= direct * (1 + 1e-9)
    assert direct * math.exp(-2 * 0.5 * 1e-10) <= hi * (1 + 1e-9)
    assert hi - lo < 1e-8
