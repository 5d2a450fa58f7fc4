import json

import numpy as np
import pytest

from src.core.builders import (
    BOUND1_WEIGHT,
    DEFAULT_NULL_DIM,
    TORUS2_VARIANTS,
    ModelClass,
    StencilConfig,
    build_bound1,
    build_bound2,
    build_model,
    build_rw1,
    build_rw2,
    build_tensor_rw2,
    build_torus1,
    build_torus2,
    load_custom_stencil,
    parse_model_class,
)
from src.core.errors import LatticeError, StencilError
from src.core.lattice import LatticeSpec, node_index
from src.core.spectral import model_summary


def _null_residual(model, vector):
    return np.abs(model.structure.matvec(vector)).max()


def test_rw1_three_nodes():
    P = build_rw1(3).structure.to_dense()
    np.testing.assert_array_equal(P, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
    np.testing.assert_allclose(np.linalg.eigvalsh(P), [0, 1, 3], atol=1e-12)


def test_rw1_is_tridiagonal():
    P = build_rw1(8).structure.to_dense()
    np.testing.assert_array_equal(np.diag(P), [1, 2, 2, 2, 2, 2, 2, 1])
    assert np.count_nonzero(np.triu(P, 2)) == 0


def test_rw2_annihilates_linear_trend():
    model = build_rw2(10)
    assert _null_residual(model, np.arange(1, 11, dtype=float)) < 1e-12
    assert model.null_dim == 2


def test_rw2_needs_five_nodes():
    with pytest.raises(LatticeError):
        build_rw2(4)


def test_torus1_stencil():
    model = build_torus1(7, 7)
    P = model.structure.to_dense()
    assert np.all(np.diag(P) == 20)
    lattice = model.lattice
    row = P[node_index(4, 4, lattice)]
    assert row[node_index(5, 4, lattice)] == -8
    assert row[node_index(4, 3, lattice)] == -8
    assert row[node_index(5, 5, lattice)] == 2
    assert row[node_index(4, 6, lattice)] == 1
    np.testing.assert_allclose(P.sum(axis=1), 0, atol=1e-12)


def test_torus1_small_grid_diagonal():
    assert np.all(build_torus1(5, 5).structure.diagonal() == 20)


@pytest.mark.parametrize("variant", TORUS2_VARIANTS)
def test_torus2_is_positive_semidefinite(variant):
    model = build_torus2(6, 6, variant=variant)
    values = np.linalg.eigvalsh(model.structure.to_dense())
    assert values.min() >= -1e-9 * values.max()
    assert variant in model.label


def test_torus2_rejects_unknown_variant():
    with pytest.raises(StencilError):
        build_torus2(6, 6, variant="corners_twisted")


def test_bound1_null_space_is_plane():
    model = build_bound1(7, 6)
    for axis in (0, 1):
        assert _null_residual(model, model.lattice.ramp(axis).astype(float)) < 1e-12
    values = np.linalg.eigvalsh(model.structure.to_dense())
    assert np.sum(values < 1e-8 * values.max()) == 3


def test_bound1_penalizes_saddle_and_twist():
    model = build_bound1(6, 6)
    coords = model.lattice.coordinates().astype(float)
    saddle = coords[:, 0] ** 2 - coords[:, 1] ** 2
    assert _null_residual(model, saddle) > 1e-6
    assert _null_residual(model, coords[:, 0] * coords[:, 1]) > 1e-6


def test_bound1_reweights_bound2_neighbourhood():
    bound1 = build_bound1(9, 8).structure.to_dense()
    bound2 = build_bound2(9, 8).structure.to_dense()
    assert np.array_equal(bound1 != 0, bound2 != 0)
    np.testing.assert_allclose(bound1, BOUND1_WEIGHT * bound2, rtol=1e-12, atol=1e-12)
    # interior node (5, 4) carries the scaled Laplacian^2 stencil
    centre = 4 * 8 + 3
    assert bound1[centre, centre] == pytest.approx(20 * BOUND1_WEIGHT)
    assert bound1[centre, centre + 1] == pytest.approx(-8 * BOUND1_WEIGHT)
    assert bound1[centre, centre + 9] == pytest.approx(2 * BOUND1_WEIGHT)
    assert bound1[centre, centre + 16] == pytest.approx(BOUND1_WEIGHT)


def test_bound1_rejects_bad_arguments():
    with pytest.raises(StencilError):
        build_bound1(6, 6, weight=0.0)
    with pytest.raises(LatticeError):
        build_bound1(4, 6)


def test_bound2_null_space():
    model = build_bound2(6, 7)
    coords = model.lattice.coordinates().astype(float)
    assert _null_residual(model, coords[:, 0]) < 1e-12
    assert _null_residual(model, coords[:, 1]) < 1e-12
    assert _null_residual(model, coords[:, 0] * coords[:, 1]) > 1e-6


def test_tensor_rw2_keeps_bilinear_term():
    model = build_tensor_rw2(6, 6)
    coords = model.lattice.coordinates().astype(float)
    assert _null_residual(model, coords[:, 0] * coords[:, 1]) < 1e-12
    assert model.null_dim == 4


def test_default_null_dims():
    assert DEFAULT_NULL_DIM[ModelClass.RW1] == 1
    assert DEFAULT_NULL_DIM[ModelClass.RW2] == 2
    assert DEFAULT_NULL_DIM[ModelClass.BOUND1] == 3


def test_parse_model_class_alias():
    assert parse_model_class("rw2d") is ModelClass.BOUND1
    assert parse_model_class("RW1") is ModelClass.RW1
    with pytest.raises(StencilError):
        parse_model_class("rw3")


def test_build_model_defaults_to_square_grid():
    model = build_model("bound1", 6)
    assert (model.lattice.n1, model.lattice.n2) == (6, 6)
    assert model.label == "bound1_6x6"


def test_null_dim_out_of_range():
    with pytest.raises(LatticeError):
        build_rw1(3, null_dim=3)


def test_custom_rw1_replicates_builder(stencil_dir):
    config = StencilConfig.from_file(stencil_dir / "rw1.json")
    for n in (3, 10):
        custom = load_custom_stencil(config, LatticeSpec.chain(n))
        assert custom.structure.same_entries(build_rw1(n).structure)


def test_custom_bound1_replicates_builder(stencil_dir):
    config = StencilConfig.from_file(stencil_dir / "bound1.json")
    custom = load_custom_stencil(config, LatticeSpec.grid(6, 7))
    builtin = build_bound1(6, 7)
    assert custom.structure.same_entries(builtin.structure)
    _, a = model_summary(custom)
    _, b = model_summary(builtin)
    assert a.sigma_ref == pytest.approx(b.sigma_ref, rel=1e-10)


def test_custom_single_increment_has_rank_one():
    config = StencilConfig.from_dict({
        "name": "single",
        "topology": "bounded",
        "null_dim": 2,
        "order": 1,
        "templates": [{"region": "all", "range": {"d": [1, 1]}, "offsets": [[0, 0, -1], [1, 0, 1]]}],
    })
    model = load_custom_stencil(config, LatticeSpec.chain(3))
    assert np.linalg.matrix_rank(model.structure.to_dense()) == 1


@pytest.mark.parametrize("null_dim", [3, 7])
def test_custom_null_dim_must_fit_lattice(stencil_dir, null_dim):
    data = json.loads((stencil_dir / "rw1.json").read_text())
    config = StencilConfig.from_dict({**data, "null_dim": null_dim})
    with pytest.raises(StencilError, match="null_dim"):
        load_custom_stencil(config, LatticeSpec.chain(3))


def test_custom_second_order_must_sum_to_zero():
    with pytest.raises(StencilError):
        StencilConfig.from_dict({
            "name": "bad",
            "topology": "bounded",
            "null_dim": 1,
            "templates": [{"offsets": [[0, 0, 1], [1, 0, -3], [2, 0, 1]]}],
        })


def test_custom_template_leaving_lattice():
    config = StencilConfig.from_dict({
        "name": "overrun",
        "topology": "bounded",
        "null_dim": 1,
        "templates": [{"region": "all", "offsets": [[0, 0, -1], [1, 0, 1]]}],
    })
    with pytest.raises(StencilError):
        load_custom_stencil(config, LatticeSpec.chain(5))


def test_stencil_schema_checks(tmp_path):
    with pytest.raises(StencilError):
        StencilConfig.from_dict({"name": "x", "topology": "bounded", "templates": []})
    with pytest.raises(StencilError):
        StencilConfig.from_dict({"version": 2, "name": "x", "topology": "bounded",
                                 "null_dim": 1, "templates": []})
    path = tmp_path / "torus.json"
    path.write_text(json.dumps({
        "name": "ring", "topology": "torus", "null_dim": 1, "order": 1,
        "templates": [{"offsets": [[0, 0, -1], [1, 0, 1]]}],
    }))
    model = load_custom_stencil(StencilConfig.from_file(path), LatticeSpec.grid(5, 5))
    np.testing.assert_allclose(model.structure.matvec(np.ones(25)), 0, atol=1e-12)
