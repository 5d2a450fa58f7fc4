"""
Lattice core - index sets, increment operators and structure-matrix assembly

Every structure matrix in the package is assembled as P = D^T W D from a
stack of increment rows D, so positive semidefiniteness holds by construction.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp

from src.core.errors import LatticeError, NumericalError

logger = logging.getLogger(__name__)

MIN_CHAIN_NODES = 3
MIN_GRID_NODES = 5


class LatticeKind(str, Enum):
    CHAIN = "chain"
    GRID = "grid"


class Topology(str, Enum):
    BOUNDED = "bounded"
    TORUS = "torus"


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry of the index set: a 1D chain or a 2D grid, bounded or toroidal"""

    kind: LatticeKind
    n1: int
    n2: int = 1
    topology: Topology = Topology.BOUNDED

    def __post_init__(self):
        object.__setattr__(self, "kind", LatticeKind(self.kind))
        object.__setattr__(self, "topology", Topology(self.topology))
        if self.kind is LatticeKind.CHAIN:
            if self.n2 != 1:
                raise LatticeError(f"Chains have n2 = 1, got {self.n2}")
            if self.n1 < MIN_CHAIN_NODES:
                raise LatticeError(f"Chain needs at least {MIN_CHAIN_NODES} nodes, got {self.n1}")
        elif self.n1 < MIN_GRID_NODES or self.n2 < MIN_GRID_NODES:
            raise LatticeError(
                f"Grid needs at least {MIN_GRID_NODES}x{MIN_GRID_NODES} nodes, got {self.n1}x{self.n2}"
            )

    @classmethod
    def chain(cls, n: int, topology: Topology = Topology.BOUNDED) -> "LatticeSpec":
        return cls(LatticeKind.CHAIN, int(n), 1, topology)

    @classmethod
    def grid(cls, n1: int, n2: int, topology: Topology = Topology.BOUNDED) -> "LatticeSpec":
        return cls(LatticeKind.GRID, int(n1), int(n2), topology)

    @property
    def total_nodes(self) -> int:
        return self.n1 * self.n2

    @property
    def is_torus(self) -> bool:
        return self.topology is Topology.TORUS

    def coordinates(self) -> np.ndarray:
        """(total_nodes, 2) array of 1-based (d, s) pairs in row-major order"""
        d, s = np.meshgrid(np.arange(1, self.n1 + 1), np.arange(1, self.n2 + 1), indexing="ij")
        return np.column_stack([d.ravel(), s.ravel()])

    def ramp(self, axis: int) -> np.ndarray:
        """Coordinate ramp along one axis (0 -> d, 1 -> s) as a node vector"""
        return self.coordinates()[:, axis].astype(float)


def node_index(d: int, s: int, lattice: LatticeSpec) -> int:
    """Row-major linear index of the 1-based position (d, s)"""
    if not (1 <= d <= lattice.n1 and 1 <= s <= lattice.n2):
        raise LatticeError(
            f"Position ({d}, {s}) outside {lattice.n1}x{lattice.n2} lattice"
        )
    return (d - 1) * lattice.n2 + (s - 1)


def wrap_index(d: int, s: int, lattice: LatticeSpec) -> int:
    """Like node_index but cyclic in both axes (torus neighbours)"""
    return node_index((d - 1) % lattice.n1 + 1, (s - 1) % lattice.n2 + 1, lattice)


Row = Tuple[Tuple[int, float], ...]


@dataclass(frozen=True)
class IncrementSet:
    """Stack of increment rows; row r contributes weights[r] * (row . x)^2 to x^T P x"""

    rows: Tuple[Row, ...]
    weights: Tuple[float, ...] = field(default=())

    def __post_init__(self):
        if not self.weights:
            object.__setattr__(self, "weights", tuple(1.0 for _ in self.rows))
        if len(self.weights) != len(self.rows):
            raise NumericalError("Increment weights and rows differ in length")
        for row in self.rows:
            if sum(1 for _, c in row if c != 0) < 2:
                raise NumericalError(f"Increment row needs at least 2 nonzero coefficients: {row}")

    @classmethod
    def from_rows(cls, rows: Iterable[Dict[int, float]], weight: float = 1.0) -> "IncrementSet":
        """Build from {node: coefficient} dicts, merging repeated nodes"""
        packed = []
        for row in rows:
            packed.append(tuple(sorted((int(i), float(c)) for i, c in row.items() if c != 0)))
        return cls(tuple(packed), tuple(weight for _ in packed))

    @property
    def row_count(self) -> int:
        return len(self.rows)

    def __add__(self, other: "IncrementSet") -> "IncrementSet":
        return IncrementSet(self.rows + other.rows, self.weights + other.weights)

    def operator(self, n: int) -> sp.csr_matrix:
        """Sparse increment operator D (row_count x n)"""
        r, c, v = [], [], []
        for k, row in enumerate(self.rows):
            for i, coef in row:
                r.append(k)
                c.append(i)
                v.append(coef)
        return sp.csr_matrix((v, (r, c)), shape=(self.row_count, n))

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Row-wise increment values row . x"""
        return np.array([sum(coef * x[i] for i, coef in row) for row in self.rows])


@dataclass(frozen=True)
class SparseSymmetricMatrix:
    """Symmetric matrix stored as its upper-triangle coordinate list"""

    dimension: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    @classmethod
    def from_sparse(cls, matrix: sp.spmatrix) -> "SparseSymmetricMatrix":
        upper = sp.triu(sp.coo_matrix(matrix)).tocoo()
        upper.sum_duplicates()
        keep = upper.data != 0
        order = np.lexsort((upper.col[keep], upper.row[keep]))
        return cls(
            matrix.shape[0],
            upper.row[keep][order].astype(np.int64),
            upper.col[keep][order].astype(np.int64),
            upper.data[keep][order].astype(float),
        )

    @property
    def nnz(self) -> int:
        return len(self.values)

    def to_sparse(self) -> sp.csr_matrix:
        upper = sp.coo_matrix((self.values, (self.rows, self.cols)), shape=(self.dimension,) * 2)
        strict = sp.triu(upper, k=1)
        return (upper + strict.T).tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.to_sparse() @ np.asarray(x, dtype=float)

    def diagonal(self) -> np.ndarray:
        return self.to_sparse().diagonal()

    def scaled(self, factor: float) -> "SparseSymmetricMatrix":
        return SparseSymmetricMatrix(self.dimension, self.rows, self.cols, self.values * factor)

    def coordinate_frame(self) -> pd.DataFrame:
        """Coordinate list with columns i, j, value (i <= j)"""
        return pd.DataFrame({"i": self.rows, "j": self.cols, "value": self.values})

    def same_entries(self, other: "SparseSymmetricMatrix") -> bool:
        return (
            self.dimension == other.dimension
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.values, other.values)
        )


def assemble_structure_matrix(increments: IncrementSet, n: int) -> SparseSymmetricMatrix:
    """P = D^T W D for the stacked increment rows"""
    if increments.row_count == 0:
        raise NumericalError("Cannot assemble a structure matrix from an empty increment set")
    top = max(i for row in increments.rows for i, _ in row)
    if top >= n:
        raise LatticeError(f"Increment references node {top} but dimension is {n}")

    D = increments.operator(n)
    W = sp.diags(np.asarray(increments.weights, dtype=float))
    P = (D.T @ W @ D).tocsr()
    logger.debug(f"Assembled {n}x{n} structure matrix from {increments.row_count} increments")
    return SparseSymmetricMatrix.from_sparse(P)


def quadratic_form(increments: IncrementSet, x: np.ndarray) -> float:
    """Weighted sum of squared increment evaluations"""
    values = increments.evaluate(np.asarray(x, dtype=float))
    return float(np.dot(np.asarray(increments.weights), values ** 2))


def stencil_rows(
    lattice: LatticeSpec,
    template: Sequence[Tuple[int, int, float]],
    anchors: Iterable[Tuple[int, int]],
) -> List[Dict[int, float]]:
    """Place an offset template (dr, dc, coef) at each anchor position.

    Offsets wrap on a torus; on a bounded lattice an offset that leaves the
    grid raises LatticeError.
    """
    rows = []
    for d, s in anchors:
        row: Dict[int, float] = {}
        for dr, dc, coef in template:
            if lattice.is_torus:
                idx = wrap_index(d + dr, s + dc, lattice)
            else:
                idx = node_index(d + dr, s + dc, lattice)
            row[idx] = row.get(idx, 0.0) + float(coef)
        rows.append(row)
    return rows
