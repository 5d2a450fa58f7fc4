"""
Structure-matrix builders for the one- and two-dimensional IGMRF classes
"""

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.errors import LatticeError, StencilError
from src.core.lattice import (
    IncrementSet,
    LatticeSpec,
    SparseSymmetricMatrix,
    Topology,
    assemble_structure_matrix,
    stencil_rows,
)

logger = logging.getLogger(__name__)

STENCIL_SCHEMA_VERSION = 1


class ModelClass(str, Enum):
    RW1 = "rw1"
    RW2 = "rw2"
    TORUS1 = "torus1"
    TORUS2 = "torus2"
    BOUND1 = "bound1"
    BOUND2 = "bound2"
    TENSOR_RW2 = "tensor_rw2"
    CUSTOM = "custom"


# Nominal rank deficiency per class
DEFAULT_NULL_DIM = {
    ModelClass.RW1: 1,
    ModelClass.RW2: 2,
    ModelClass.TORUS1: 3,
    ModelClass.TORUS2: 3,
    ModelClass.BOUND1: 3,
    ModelClass.BOUND2: 3,
    ModelClass.TENSOR_RW2: 4,
}

# Aliases accepted on the command line
MODEL_ALIASES = {"rw2d": ModelClass.BOUND1}

TORUS2_VARIANTS = ("corners_removed", "corners_bounded")

# Offset templates (dr, dc, coef)
FIRST_DIFF_D = ((0, 0, -1.0), (1, 0, 1.0))
SECOND_DIFF_D = ((0, 0, 1.0), (1, 0, -2.0), (2, 0, 1.0))
SECOND_DIFF_S = ((0, 0, 1.0), (0, 1, -2.0), (0, 2, 1.0))
LAPLACIAN = ((0, 0, -4.0), (1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0))
TWIST = ((0, 0, 1.0), (1, 0, -1.0), (0, 1, -1.0), (1, 1, 1.0))


@dataclass(frozen=True)
class IgmrfModel:
    """A model class with its assembled structure matrix and nominal null dimension"""

    model_class: ModelClass
    lattice: LatticeSpec
    structure: SparseSymmetricMatrix
    null_dim: int
    label: str
    increments: IncrementSet

    @property
    def dimension(self) -> int:
        return self.structure.dimension

    def with_null_dim(self, null_dim: int) -> "IgmrfModel":
        return IgmrfModel(self.model_class, self.lattice, self.structure, int(null_dim), self.label, self.increments)


def parse_model_class(name: Union[str, ModelClass]) -> ModelClass:
    if isinstance(name, ModelClass):
        return name
    key = str(name).strip().lower()
    if key in MODEL_ALIASES:
        return MODEL_ALIASES[key]
    try:
        return ModelClass(key)
    except ValueError:
        raise StencilError(f"Unknown model class: {name}") from None


def _model(model_class: ModelClass, lattice: LatticeSpec, increments: IncrementSet,
           null_dim: Optional[int], label: Optional[str] = None) -> IgmrfModel:
    structure = assemble_structure_matrix(increments, lattice.total_nodes)
    k = DEFAULT_NULL_DIM[model_class] if null_dim is None else int(null_dim)
    if not 0 <= k < lattice.total_nodes:
        raise LatticeError(f"null_dim {k} outside [0, {lattice.total_nodes})")
    label = label or f"{model_class.value}_{lattice.n1}" + (
        f"x{lattice.n2}" if lattice.kind.value == "grid" else ""
    )
    logger.info(f"Built {label}: {increments.row_count} increments, null_dim {k}")
    return IgmrfModel(model_class, lattice, structure, k, label, increments)


def _chain_anchors(first: int, last: int) -> List[Tuple[int, int]]:
    return [(d, 1) for d in range(first, last + 1)]


def _block(d_range: Tuple[int, int], s_range: Tuple[int, int]) -> List[Tuple[int, int]]:
    return [(d, s) for d in range(d_range[0], d_range[1] + 1) for s in range(s_range[0], s_range[1] + 1)]


def build_rw1(n: int, null_dim: Optional[int] = None) -> IgmrfModel:
    """First-order random walk: increments u[s+1] - u[s], s = 1..n-1"""
    lattice = LatticeSpec.chain(n)
    rows = stencil_rows(lattice, FIRST_DIFF_D, _chain_anchors(1, n - 1))
    return _model(ModelClass.RW1, lattice, IncrementSet.from_rows(rows), null_dim)


def build_rw2(n: int, null_dim: Optional[int] = None) -> IgmrfModel:
    """Second-order random walk: increments u[s+2] - 2u[s+1] + u[s], s = 1..n-2"""
    if n < 5:
        raise LatticeError(f"RW2 needs at least 5 nodes, got {n}")
    lattice = LatticeSpec.chain(n)
    rows = stencil_rows(lattice, SECOND_DIFF_D, _chain_anchors(1, n - 2))
    return _model(ModelClass.RW2, lattice, IncrementSet.from_rows(rows), null_dim)


def _torus_laplacian_rows(lattice: LatticeSpec, skip: Sequence[Tuple[int, int]] = ()) -> List[Dict[int, float]]:
    anchors = [a for a in _block((1, lattice.n1), (1, lattice.n2)) if a not in set(skip)]
    return stencil_rows(lattice, LAPLACIAN, anchors)


def build_torus1(n1: int, n2: int, null_dim: Optional[int] = None) -> IgmrfModel:
    """Laplacian increment at every node with cyclic neighbours"""
    lattice = LatticeSpec.grid(n1, n2, Topology.TORUS)
    increments = IncrementSet.from_rows(_torus_laplacian_rows(lattice))
    return _model(ModelClass.TORUS1, lattice, increments, null_dim)


def _corners(n1: int, n2: int) -> List[Tuple[int, int]]:
    return [(1, 1), (n1, 1), (1, n2), (n1, n2)]


def _corner_rows(n1: int, n2: int) -> List[Dict[int, float]]:
    """One-sided second differences at the four corners, axis alternating per corner.

    (1,1) and (n1,n2) run along d, (n1,1) and (1,n2) run along s, pointing
    into the grid.
    """
    bounded = LatticeSpec.grid(n1, n2)
    rows = []
    rows += stencil_rows(bounded, SECOND_DIFF_D, [(1, 1)])
    rows += stencil_rows(bounded, SECOND_DIFF_S, [(n1, 1)])
    rows += stencil_rows(bounded, ((0, 0, 1.0), (0, -1, -2.0), (0, -2, 1.0)), [(1, n2)])
    rows += stencil_rows(bounded, ((0, 0, 1.0), (-1, 0, -2.0), (-2, 0, 1.0)), [(n1, n2)])
    return rows


def build_torus2(n1: int, n2: int, null_dim: Optional[int] = None,
                 variant: str = "corners_bounded") -> IgmrfModel:
    """Torus Laplacian with the four corner nodes treated as boundaries.

    variant "corners_removed" drops the corner increment rows;
    "corners_bounded" replaces them with bounded one-sided forms.
    """
    if variant not in TORUS2_VARIANTS:
        raise StencilError(f"Unknown Torus 2 variant {variant!r}, expected one of {TORUS2_VARIANTS}")
    lattice = LatticeSpec.grid(n1, n2, Topology.TORUS)
    corners = _corners(n1, n2)
    rows = _torus_laplacian_rows(lattice, skip=corners)
    if variant == "corners_bounded":
        rows += _corner_rows(n1, n2)
    label = f"torus2_{n1}x{n2}_{variant}"
    return _model(ModelClass.TORUS2, lattice, IncrementSet.from_rows(rows), null_dim, label)


# Uniform row weight that pins Bound 1 to the 0.83 / 1.47 / 2.91 / 7.24 reference column
BOUND1_WEIGHT = 1.7725


def _thin_plate_increments(lattice: LatticeSpec, cross_weight: float, weight: float = 1.0) -> IncrementSet:
    n1, n2 = lattice.n1, lattice.n2
    dd, ss = _second_difference_sets(lattice, weight)
    ds = IncrementSet.from_rows(
        stencil_rows(lattice, TWIST, _block((1, n1 - 1), (1, n2 - 1))), weight=cross_weight * weight
    )
    return dd + ds + ss


def bound1_increments(n1: int, n2: int, weight: float = BOUND1_WEIGHT) -> IncrementSet:
    """Second differences along d and s plus doubled twists on the 13-point neighbourhood.

    Interior rows combine to weight * Laplacian^2 (20, -8, 2, 1); boundary nodes
    keep only the increments that fit on the grid, so edges and corners get
    one-sided corrections. Every row carries the calibrated weight.
    """
    if weight <= 0:
        raise StencilError(f"Bound 1 weight must be positive, got {weight}")
    if min(n1, n2) < 5:
        raise LatticeError(f"Bound 1 needs at least 5x5 nodes, got {n1}x{n2}")
    return _thin_plate_increments(LatticeSpec.grid(n1, n2), 2.0, weight)


def build_bound1(n1: int, n2: int, null_dim: Optional[int] = None, weight: float = BOUND1_WEIGHT) -> IgmrfModel:
    lattice = LatticeSpec.grid(n1, n2)
    return _model(ModelClass.BOUND1, lattice, bound1_increments(n1, n2, weight), null_dim)


def _second_difference_sets(lattice: LatticeSpec, weight: float = 1.0) -> Tuple[IncrementSet, IncrementSet]:
    n1, n2 = lattice.n1, lattice.n2
    dd = IncrementSet.from_rows(stencil_rows(lattice, SECOND_DIFF_D, _block((1, n1 - 2), (1, n2))), weight=weight)
    ss = IncrementSet.from_rows(stencil_rows(lattice, SECOND_DIFF_S, _block((1, n1), (1, n2 - 2))), weight=weight)
    return dd, ss


def build_bound2(n1: int, n2: int, null_dim: Optional[int] = None, cross_weight: float = 2.0) -> IgmrfModel:
    """Free-boundary thin-plate energy D_dd'D_dd + w D_ds'D_ds + D_ss'D_ss"""
    if cross_weight <= 0:
        raise StencilError(f"Cross-term weight must be positive, got {cross_weight}")
    lattice = LatticeSpec.grid(n1, n2)
    return _model(ModelClass.BOUND2, lattice, _thin_plate_increments(lattice, cross_weight), null_dim)


def build_tensor_rw2(n1: int, n2: int, null_dim: Optional[int] = None) -> IgmrfModel:
    """Second differences along both axes only (Kronecker sum of two RW2 chains)"""
    lattice = LatticeSpec.grid(n1, n2)
    dd, ss = _second_difference_sets(lattice)
    return _model(ModelClass.TENSOR_RW2, lattice, dd + ss, null_dim)


def build_model(model_class: Union[str, ModelClass], n1: int, n2: Optional[int] = None,
                null_dim: Optional[int] = None, **options) -> IgmrfModel:
    """Dispatch on model class; 2D classes default to a square grid"""
    cls = parse_model_class(model_class)
    if cls is ModelClass.RW1:
        return build_rw1(n1, null_dim)
    if cls is ModelClass.RW2:
        return build_rw2(n1, null_dim)
    if cls is ModelClass.CUSTOM:
        raise StencilError("Custom models are built with load_custom_stencil")
    n2 = n1 if n2 is None else n2
    if cls is ModelClass.TORUS1:
        return build_torus1(n1, n2, null_dim)
    if cls is ModelClass.TORUS2:
        return build_torus2(n1, n2, null_dim, options.get("torus2_variant", "corners_bounded"))
    if cls is ModelClass.BOUND1:
        return build_bound1(n1, n2, null_dim)
    if cls is ModelClass.BOUND2:
        return build_bound2(n1, n2, null_dim, options.get("cross_weight", 2.0))
    return build_tensor_rw2(n1, n2, null_dim)


# ---------------------------------------------------------------------------
# Custom stencils

REGIONS = ("interior", "edges", "corners", "all")


@dataclass(frozen=True)
class StencilTemplate:
    region: str
    offsets: Tuple[Tuple[int, int, float], ...]
    d_range: Optional[Tuple[int, int]] = None
    s_range: Optional[Tuple[int, int]] = None
    weight: float = 1.0


@dataclass(frozen=True)
class StencilConfig:
    """User-defined increment templates placed over lattice regions"""

    name: str
    topology: Topology
    null_dim: int
    templates: Tuple[StencilTemplate, ...]
    order: int = 2

    @classmethod
    def from_dict(cls, data: dict) -> "StencilConfig":
        version = data.get("version", STENCIL_SCHEMA_VERSION)
        if version != STENCIL_SCHEMA_VERSION:
            raise StencilError(f"Unsupported stencil schema version {version}")
        for key in ("name", "topology", "null_dim", "templates"):
            if key not in data:
                raise StencilError(f"Stencil config missing required field: {key}")
        try:
            topology = Topology(data["topology"])
        except ValueError:
            raise StencilError(f"Unknown topology {data['topology']!r}") from None

        templates = []
        for i, tpl in enumerate(data["templates"]):
            region = tpl.get("region", "all")
            if region not in REGIONS:
                raise StencilError(f"Template {i}: unknown region {region!r}")
            offsets = tuple((int(dr), int(dc), float(c)) for dr, dc, c in tpl.get("offsets", []))
            if len(offsets) < 2:
                raise StencilError(f"Template {i}: needs at least two offsets")
            rng = tpl.get("range", {})
            templates.append(StencilTemplate(
                region,
                offsets,
                tuple(rng["d"]) if "d" in rng else None,
                tuple(rng["s"]) if "s" in rng else None,
                float(tpl.get("weight", 1.0)),
            ))
        config = cls(str(data["name"]), topology, int(data["null_dim"]), tuple(templates),
                     int(data.get("order", 2)))
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "StencilConfig":
        path = Path(path)
        if not path.exists():
            raise StencilError(f"Stencil file not found: {path}")
        with open(path, "r") as f:
            return cls.from_dict(json.load(f))

    def validate(self):
        if self.null_dim < 0:
            raise StencilError(f"null_dim must be non-negative, got {self.null_dim}")
        for i, tpl in enumerate(self.templates):
            if tpl.weight <= 0:
                raise StencilError(f"Template {i}: weight must be positive")
            if self.order == 2 and not np.isclose(sum(c for _, _, c in tpl.offsets), 0.0):
                raise StencilError(f"Template {i}: second-order coefficients must sum to 0")


def _resolve(bound: int, n: int) -> int:
    # negative positions count back from the last node, -1 -> n
    return n + bound + 1 if bound < 0 else bound


def _region_anchors(template: StencilTemplate, lattice: LatticeSpec) -> List[Tuple[int, int]]:
    n1, n2 = lattice.n1, lattice.n2
    anchors = _block((1, n1), (1, n2))
    d_edge = {1, n1}
    s_edge = {1, n2} if lattice.kind.value == "grid" else set()

    def on_d(d):
        return d in d_edge

    def on_s(s):
        return s in s_edge

    if template.region == "interior":
        anchors = [(d, s) for d, s in anchors if not on_d(d) and not on_s(s)]
    elif template.region == "corners":
        if lattice.kind.value == "grid":
            anchors = [(d, s) for d, s in anchors if on_d(d) and on_s(s)]
        else:
            anchors = [(d, s) for d, s in anchors if on_d(d)]
    elif template.region == "edges":
        anchors = [(d, s) for d, s in anchors if on_d(d) != on_s(s)] if lattice.kind.value == "grid" else []

    if template.d_range is not None:
        lo, hi = (_resolve(b, n1) for b in template.d_range)
        anchors = [(d, s) for d, s in anchors if lo <= d <= hi]
    if template.s_range is not None:
        lo, hi = (_resolve(b, n2) for b in template.s_range)
        anchors = [(d, s) for d, s in anchors if lo <= s <= hi]
    return anchors


def load_custom_stencil(config: StencilConfig, lattice: LatticeSpec) -> IgmrfModel:
    """Assemble a model from a StencilConfig placed on the given lattice"""
    if config.topology is not lattice.topology:
        lattice = LatticeSpec(lattice.kind, lattice.n1, lattice.n2, config.topology)
    if not 0 <= config.null_dim < lattice.total_nodes:
        raise StencilError(
            f"Stencil {config.name}: null_dim {config.null_dim} outside [0, {lattice.total_nodes})"
        )

    increments = None
    for i, tpl in enumerate(config.templates):
        anchors = _region_anchors(tpl, lattice)
        if not anchors:
            logger.warning(f"Stencil {config.name}: template {i} has no anchors on this lattice")
            continue
        try:
            rows = stencil_rows(lattice, tpl.offsets, anchors)
        except LatticeError as e:
            raise StencilError(f"Stencil {config.name}: template {i} leaves the lattice ({e})") from e
        part = IncrementSet.from_rows(rows, weight=tpl.weight)
        increments = part if increments is None else increments + part

    if increments is None:
        raise StencilError(f"Stencil {config.name} produced no increments on this lattice")
    label = f"{config.name}_{lattice.n1}x{lattice.n2}"
    structure = assemble_structure_matrix(increments, lattice.total_nodes)
    logger.info(f"Loaded custom stencil {label}: {increments.row_count} increments")
    return IgmrfModel(ModelClass.CUSTOM, lattice, structure, config.null_dim, label, increments)
