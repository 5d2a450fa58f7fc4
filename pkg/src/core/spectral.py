"""
Spectral module - rank-deficient eigendecomposition, generalized-inverse
diagonals and the geometric-mean reference standard deviation
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from src.core.errors import DimensionCapError, NumericalError
from src.core.lattice import SparseSymmetricMatrix

logger = logging.getLogger(__name__)

DEFAULT_MAX_DIMENSION = 12_000
DEFAULT_LONG_RUNNING_DIMENSION = 2_500
DEFAULT_REL_TOL = 1e-8
NEGATIVE_VARIANCE_TOL = 1e-12


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenvalues with orthonormal eigenvectors in matching columns"""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.eigenvalues)

    @property
    def largest(self) -> float:
        return float(self.eigenvalues[-1])

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T


@dataclass(frozen=True)
class MarginalSummary:
    sigma_at_unit_lambda: np.ndarray
    sigma_ref: float
    null_dim_used: int
    numeric_null_dim: int
    smallest_retained: float
    largest_dropped: Optional[float]
    warnings: Tuple[str, ...] = field(default=())

    @property
    def diagnostics(self) -> dict:
        return {
            "smallest_retained_eigenvalue": self.smallest_retained,
            "largest_dropped_eigenvalue": self.largest_dropped,
            "warnings": list(self.warnings),
        }


def eigendecompose(
    P: SparseSymmetricMatrix,
    long_running: bool = False,
    max_dimension: int = DEFAULT_MAX_DIMENSION,
    long_running_dimension: int = DEFAULT_LONG_RUNNING_DIMENSION,
) -> SpectralDecomposition:
    """Full dense symmetric eigendecomposition, eigenvalues ascending"""
    n = P.dimension
    if n > max_dimension:
        raise DimensionCapError(
            f"Dimension {n} exceeds the dense eigen-solve cap of {max_dimension}"
        )
    if n > long_running_dimension and not long_running:
        raise DimensionCapError(
            f"Dimension {n} needs a long dense eigen-solve; rerun with --long-running"
        )

    logger.info(f"Eigendecomposing {n}x{n} structure matrix")
    values, vectors = scipy.linalg.eigh(P.to_dense(), driver="evd")
    # fix the sign of each eigenvector so output does not depend on LAPACK's choice
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(n)])
    signs[signs == 0] = 1.0
    return SpectralDecomposition(values, vectors * signs)


def numeric_rank(decomp: SpectralDecomposition, rel_tol: float = DEFAULT_REL_TOL) -> int:
    """Count of eigenvalues below rel_tol times the largest (numerical null dimension)"""
    return int(np.sum(decomp.eigenvalues < rel_tol * decomp.largest))


def pseudo_inverse_diagonal(
    decomp: SpectralDecomposition, null_dim: int, rel_tol: float = DEFAULT_REL_TOL
) -> np.ndarray:
    """Diagonal of the generalized inverse with the null_dim smallest modes dropped"""
    n = decomp.dimension
    if not 0 <= null_dim < n:
        raise NumericalError(f"null_dim {null_dim} outside [0, {n})")

    retained = decomp.eigenvalues[null_dim:]
    bad = np.nonzero(retained <= rel_tol * decomp.largest)[0]
    if bad.size:
        index = int(bad[0]) + null_dim
        raise NumericalError(
            f"Retained eigenvalue {index} is {decomp.eigenvalues[index]:.3e}, "
            f"singular at null_dim {null_dim}"
        )
    vectors = decomp.eigenvectors[:, null_dim:]
    return (vectors ** 2) @ (1.0 / retained)


def marginal_stddevs(variances: np.ndarray) -> np.ndarray:
    variances = np.asarray(variances, dtype=float)
    if np.any(variances < -NEGATIVE_VARIANCE_TOL):
        raise NumericalError(f"Negative marginal variance {variances.min():.3e}")
    variances = np.clip(variances, 0.0, None)
    if np.any(variances == 0.0):
        raise NumericalError("Degenerate marginal: zero variance at one or more nodes")
    return np.sqrt(variances)


def reference_stddev(sigmas: np.ndarray) -> float:
    """Geometric mean of the per-node standard deviations"""
    sigmas = np.asarray(sigmas, dtype=float)
    if sigmas.size == 0 or np.any(sigmas <= 0):
        raise NumericalError("Reference standard deviation needs strictly positive entries")
    return float(np.exp(np.mean(np.log(sigmas))))


def marginal_at_lambda(sigma_ref: float, lam: float) -> float:
    if lam <= 0:
        raise NumericalError(f"Precision must be positive, got {lam}")
    return sigma_ref / np.sqrt(lam)


def summarize(
    decomp: SpectralDecomposition, null_dim: int, rel_tol: float = DEFAULT_REL_TOL
) -> MarginalSummary:
    """Per-node sigma at unit precision, sigma_ref and rank diagnostics"""
    variances = pseudo_inverse_diagonal(decomp, null_dim, rel_tol)
    sigmas = marginal_stddevs(variances)
    sigma_ref = reference_stddev(sigmas)
    numeric = numeric_rank(decomp, rel_tol)

    warnings = []
    if numeric != null_dim:
        message = (
            f"Numerical null dimension {numeric} differs from the null_dim {null_dim} used"
        )
        logger.warning(message)
        warnings.append(message)

    return MarginalSummary(
        sigma_at_unit_lambda=sigmas,
        sigma_ref=sigma_ref,
        null_dim_used=null_dim,
        numeric_null_dim=numeric,
        smallest_retained=float(decomp.eigenvalues[null_dim]),
        largest_dropped=float(decomp.eigenvalues[null_dim - 1]) if null_dim > 0 else None,
        warnings=tuple(warnings),
    )


def model_summary(model, long_running: bool = False, null_dim: Optional[int] = None,
                  **solver_options) -> Tuple[SpectralDecomposition, MarginalSummary]:
    """Decompose a built model and summarize its marginals"""
    rel_tol = solver_options.pop("rel_tol", DEFAULT_REL_TOL)
    decomp = eigendecompose(model.structure, long_running=long_running, **solver_options)
    k = model.null_dim if null_dim is None else int(null_dim)
    summary = summarize(decomp, k, rel_tol)
    logger.info(f"{model.label}: sigma_ref = {summary.sigma_ref:.6g} (null_dim {k})")
    return decomp, summary
