import numpy as np
import pytest

from src.core.builders import build_bound1, build_bound2, build_rw1, build_rw2, build_torus1
from src.core.errors import LatticeError, NumericalError
from src.core.lattice import (
    IncrementSet,
    LatticeSpec,
    Topology,
    assemble_structure_matrix,
    node_index,
    quadratic_form,
)


def test_node_index_row_major():
    grid = LatticeSpec.grid(5, 5)
    assert node_index(1, 1, grid) == 0
    assert node_index(2, 3, grid) == 7
    assert node_index(5, 5, grid) == 24


def test_node_index_is_bijective():
    grid = LatticeSpec.grid(6, 9)
    seen = {node_index(d, s, grid) for d in range(1, 7) for s in range(1, 10)}
    assert seen == set(range(54))


@pytest.mark.parametrize("d,s", [(0, 1), (6, 1), (1, 0), (1, 6)])
def test_node_index_out_of_range(d, s):
    with pytest.raises(IndexError):
        node_index(d, s, LatticeSpec.grid(5, 5))


def test_lattice_minimum_sizes():
    with pytest.raises(LatticeError):
        LatticeSpec.chain(2)
    with pytest.raises(LatticeError):
        LatticeSpec.grid(4, 5)
    grid = LatticeSpec.grid(5, 7, Topology.TORUS)
    assert grid.total_nodes == 35
    assert grid.is_torus


def test_assemble_rw1_three_nodes():
    inc = IncrementSet.from_rows([{0: -1, 1: 1}, {1: -1, 2: 1}])
    P = assemble_structure_matrix(inc, 3).to_dense()
    np.testing.assert_array_equal(P, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])


def test_assemble_single_increment():
    P = assemble_structure_matrix(IncrementSet.from_rows([{0: -1, 1: 1}]), 2).to_dense()
    np.testing.assert_array_equal(P, [[1, -1], [-1, 1]])


def test_assemble_rw2_four_nodes():
    inc = IncrementSet.from_rows([{0: 1, 1: -2, 2: 1}, {1: 1, 2: -2, 3: 1}])
    P = assemble_structure_matrix(inc, 4).to_dense()
    np.testing.assert_array_equal(
        P, [[1, -2, 1, 0], [-2, 5, -4, 1], [1, -4, 5, -2], [0, 1, -2, 1]]
    )


def test_assemble_rejects_empty_and_out_of_range():
    with pytest.raises(NumericalError):
        assemble_structure_matrix(IncrementSet(()), 3)
    with pytest.raises(LatticeError):
        assemble_structure_matrix(IncrementSet.from_rows([{0: -1, 5: 1}]), 3)


def test_increment_rows_need_two_coefficients():
    with pytest.raises(NumericalError):
        IncrementSet.from_rows([{0: 1.0}])


def test_coordinate_list_is_upper_triangle():
    P = build_rw2(6).structure
    assert np.all(P.rows <= P.cols)
    frame = P.coordinate_frame()
    assert list(frame.columns) == ["i", "j", "value"]


@pytest.mark.parametrize("builder", [
    lambda: build_rw1(9),
    lambda: build_rw2(10),
    lambda: build_bound1(5, 5),
    lambda: build_bound2(5, 6),
    lambda: build_torus1(5, 5),
])
def test_quadratic_form_matches_increments(builder, rng):
    model = builder()
    for _ in range(5):
        x = rng.standard_normal(model.dimension)
        expected = quadratic_form(model.increments, x)
        actual = x @ model.structure.matvec(x)
        assert actual == pytest.approx(expected, rel=1e-12)


def test_constants_in_null_space(small_models):
    for model in small_models:
        ones = np.ones(model.dimension)
        assert np.abs(model.structure.matvec(ones)).max() < 1e-12


@pytest.mark.parametrize("model,null_dim", [
    (build_rw1(8), 1),
    (build_rw2(9), 2),
    (build_bound1(5, 6), 3),
    (build_bound2(6, 5), 3),
])
def test_rank_matches_null_dimension(model, null_dim):
    rank = np.linalg.matrix_rank(model.structure.to_dense())
    assert rank == model.dimension - null_dim
    assert rank <= model.increments.row_count


def test_weighted_rows_scale_quadratic_form():
    inc = IncrementSet.from_rows([{0: -1, 1: 1}], weight=2.0)
    P = assemble_structure_matrix(inc, 2).to_dense()
    np.testing.assert_array_equal(P, [[2, -2], [-2, 2]])
