"""
Sampling and verification - Monte Carlo draws from the constrained IGMRF and
a dense brute-force generalized-inverse oracle
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from src.core.errors import ConfigError, NumericalError
from src.core.lattice import SparseSymmetricMatrix
from src.core.spectral import (
    DEFAULT_REL_TOL,
    SpectralDecomposition,
    model_summary,
    reference_stddev,
)

logger = logging.getLogger(__name__)

CHUNK_SIZE = 4096
ORACLE_MAX_DIMENSION = 400
MIN_VERIFY_COUNT = 1000


@dataclass(frozen=True)
class SampleBatch:
    model_label: str
    lam: float
    count: int
    seed: int
    draws: np.ndarray  # (count, nodes)


@dataclass(frozen=True)
class VerificationReport:
    model: str
    lam: float
    count: int
    seed: int
    empirical_sref: float
    expected: float
    rel_dev: float
    tolerance: float
    passed: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "lambda": self.lam,
            "N": self.count,
            "seed": self.seed,
            "empirical_sref": self.empirical_sref,
            "expected": self.expected,
            "rel_dev": self.rel_dev,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "note": self.note,
        }


def _chunk_draws(basis: np.ndarray, scales: np.ndarray, seed_seq: np.random.SeedSequence, rows: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    z = rng.standard_normal((rows, len(scales)))
    return (z * scales) @ basis.T


def sample_igmrf(decomp: SpectralDecomposition, lam: float, null_dim: int, count: int, seed: int,
                 label: str = "model", threads: int = 1,
                 rel_tol: float = DEFAULT_REL_TOL) -> SampleBatch:
    """Draw u = sum_{j > null_dim} Gamma_j z_j / sqrt(lam * lambda_j).

    Draws are generated in fixed-size chunks, each from its own PCG64
    substream spawned from the seed, so the batch does not depend on the
    number of worker threads.
    """
    if lam <= 0:
        raise NumericalError(f"Precision must be positive, got {lam}")
    if count < 1:
        raise ConfigError(f"count must be at least 1, got {count}")
    retained = decomp.eigenvalues[null_dim:]
    if np.any(retained <= rel_tol * decomp.largest):
        raise NumericalError(f"Nonpositive retained eigenvalue at null_dim {null_dim}")

    basis = decomp.eigenvectors[:, null_dim:]
    scales = 1.0 / np.sqrt(lam * retained)
    sizes = [min(CHUNK_SIZE, count - start) for start in range(0, count, CHUNK_SIZE)]
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        chunks = list(pool.map(lambda args: _chunk_draws(basis, scales, *args), zip(children, sizes)))

    draws = np.vstack(chunks)
    logger.info(f"Sampled {count} draws of {label} at lambda={lam} (seed {seed})")
    return SampleBatch(label, float(lam), int(count), int(seed), draws)


def empirical_marginal_sd(batch: SampleBatch) -> np.ndarray:
    if batch.count < 2:
        raise NumericalError("Empirical standard deviation needs at least 2 draws")
    return np.std(batch.draws, axis=0, ddof=1)


def dense_pinv_oracle(P: SparseSymmetricMatrix, null_dim: int,
                      max_dimension: int = ORACLE_MAX_DIMENSION) -> np.ndarray:
    """Full generalized inverse reassembled by explicit matrix products"""
    if P.dimension > max_dimension:
        raise ConfigError(f"Oracle limited to dimension {max_dimension}, got {P.dimension}")
    values, vectors = np.linalg.eigh(P.to_dense())
    kept = vectors[:, null_dim:]
    inverse = np.diag(1.0 / values[null_dim:])
    return kept @ inverse @ kept.T


def verify_sref_montecarlo(model, lam: float, count: int, tolerance: float, seed: int,
                           threads: int = 1, long_running: bool = False) -> VerificationReport:
    """Compare the empirical geometric-mean sigma with sigma_ref / sqrt(lam)"""
    decomp, summary = model_summary(model, long_running=long_running)
    expected = summary.sigma_ref / np.sqrt(lam)

    batch = sample_igmrf(decomp, lam, model.null_dim, count, seed, model.label, threads)
    if count < 2:
        empirical = float("nan")
        rel_dev = float("inf")
    else:
        empirical = reference_stddev(empirical_marginal_sd(batch))
        rel_dev = abs(empirical - expected) / expected

    note = ""
    passed = rel_dev <= tolerance
    if count < MIN_VERIFY_COUNT:
        passed = False
        note = (f"sample of {count} draws is too small for a reliable check; "
                f"per-node relative standard error is about {1 / np.sqrt(2 * max(count - 1, 1)):.0%}")

    report = VerificationReport(model.label, float(lam), int(count), int(seed), empirical,
                                float(expected), float(rel_dev), float(tolerance), bool(passed), note)
    log = logger.info if passed else logger.warning
    log(f"Verification {model.label}: empirical {empirical:.4g} vs expected {expected:.4g} "
        f"(rel dev {rel_dev:.3%}, tol {tolerance:.3%}) -> {'pass' if passed else 'fail'}")
    return report


def batch_frame(batch: SampleBatch):
    """Draws as a DataFrame with one draw per row"""
    return pd.DataFrame(batch.draws, columns=[f"u{i}" for i in range(batch.draws.shape[1])])
