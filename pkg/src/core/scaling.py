"""
Hyperprior scaling - upper limits on the marginal standard deviation and
rescaled standard-deviation parameters across IGMRF types
"""

import logging
from dataclasses import asdict, dataclass
from typing import Callable, List, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from src.core.builders import ModelClass, parse_model_class
from src.core.errors import ConfigError, NumericalError

logger = logging.getLogger(__name__)

FAMILIES = ("gaussian-as-written", "generic-quantile")


@dataclass(frozen=True)
class HyperpriorSpec:
    mu: float
    b: float
    alpha: float
    family: str = "gaussian-as-written"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"Unknown hyperprior family {self.family!r}")
        if not 0 < self.alpha < 0.5:
            raise ConfigError(f"alpha must lie in (0, 0.5), got {self.alpha}")
        if self.b <= 0:
            raise ConfigError(f"b must be positive, got {self.b}")
        if self.family == "gaussian-as-written":
            _positive_quantile(self.alpha, self.mu)


@dataclass(frozen=True)
class ModelScaling:
    label: str
    sigma_ref: float
    U: float
    b_new: float


@dataclass(frozen=True)
class ScalingReport:
    per_model: Tuple[ModelScaling, ...]
    aggregated_U: float
    inputs: HyperpriorSpec

    def b_new(self, label: str) -> float:
        for row in self.per_model:
            if row.label == label:
                return row.b_new
        raise KeyError(label)

    def to_dict(self) -> dict:
        return {
            "inputs": {"mu": self.inputs.mu, "b": self.inputs.b, "alpha": self.inputs.alpha},
            "models": [asdict(row) for row in self.per_model],
            "aggregated_U": self.aggregated_U,
        }


def gaussian_quantile(alpha: float, mu: float) -> float:
    """alpha-quantile of a unit-variance Gaussian centred at mu"""
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    return float(stats.norm.ppf(alpha, loc=mu, scale=1.0))


def _positive_quantile(alpha: float, mu: float) -> float:
    q = gaussian_quantile(alpha, mu)
    if q <= 0:
        raise NumericalError(
            f"upper-limit formula undefined for this (alpha, mu) = ({alpha}, {mu}): quantile {q:.4f} <= 0"
        )
    return q


def _require_positive(**values):
    for name, value in values.items():
        if value <= 0:
            raise NumericalError(f"{name} must be positive, got {value}")


def upper_limit(b: float, sigma_ref: float, alpha: float, mu: float) -> float:
    """U = (b sigma_ref^2 / q)^(1/2), q the alpha-quantile of N(mu, 1)"""
    _require_positive(b=b, sigma_ref=sigma_ref)
    q = _positive_quantile(alpha, mu)
    return float(np.sqrt(b * sigma_ref ** 2 / q))


def upper_limit_generic(sigma_ref: float, alpha: float, quantile_fn: Callable[[float], float]) -> float:
    """U solving Pr(lambda / sigma_ref^2 < 1/U^2) = alpha for a hyperprior on lambda.

    quantile_fn is the hyperprior's quantile function, e.g. a frozen
    scipy.stats gamma's ppf.
    """
    _require_positive(sigma_ref=sigma_ref)
    q = float(quantile_fn(alpha))
    if q <= 0:
        raise NumericalError(f"Hyperprior quantile at alpha={alpha} is {q}, must be positive")
    return float(sigma_ref / np.sqrt(q))


def aggregate_upper_limit(limits: Sequence[float]) -> float:
    if len(limits) == 0:
        raise NumericalError("Cannot aggregate an empty list of upper limits")
    return float(np.median(np.asarray(limits, dtype=float)))


def scaled_sd_parameter(U: float, alpha: float, mu: float, sigma_ref: float) -> float:
    """b_new = U^2 q / sigma_ref^2"""
    _require_positive(U=U, sigma_ref=sigma_ref)
    q = _positive_quantile(alpha, mu)
    return float(U ** 2 * q / sigma_ref ** 2)


def transfer_sd_parameter(b_src: float, sigma_ref_src: float, sigma_ref_dst: float) -> float:
    _require_positive(b_src=b_src, sigma_ref_src=sigma_ref_src, sigma_ref_dst=sigma_ref_dst)
    return float(b_src * sigma_ref_src ** 2 / sigma_ref_dst ** 2)


def subdivision_precision(lam: float, k: int, model_class: Union[str, ModelClass]) -> float:
    """Precision after splitting each interval into k equal parts.

    First-order chains scale by k, second-order chains by k^3 and
    two-dimensional second-order fields by k^2.
    """
    if lam <= 0:
        raise NumericalError(f"Precision must be positive, got {lam}")
    if int(k) != k or k < 1:
        raise ConfigError(f"Subdivision factor must be a positive integer, got {k}")
    if isinstance(model_class, str) and model_class.lower() == "2d":
        cls = ModelClass.BOUND1
    else:
        cls = parse_model_class(model_class)
    if cls is ModelClass.RW1:
        return k * lam
    if cls is ModelClass.RW2:
        return k ** 3 * lam
    if cls is ModelClass.CUSTOM:
        raise ConfigError("No subdivision law for custom stencils")
    return k ** 2 * lam


def scaling_pipeline(b: float, mu: float, alpha: float,
                     models: List[Tuple[str, float]]) -> ScalingReport:
    """Per-model U at the shared b, median U, then b_new for every model"""
    if not models:
        raise ConfigError("Scaling needs at least one model")
    spec = HyperpriorSpec(mu=mu, b=b, alpha=alpha)

    limits = [upper_limit(b, sigma, alpha, mu) for _, sigma in models]
    U = aggregate_upper_limit(limits)
    rows = tuple(
        ModelScaling(label, float(sigma), float(u), scaled_sd_parameter(U, alpha, mu, sigma))
        for (label, sigma), u in zip(models, limits)
    )
    for row in rows:
        logger.info(f"{row.label}: sigma_ref={row.sigma_ref:.4g} U={row.U:.4g} b_new={row.b_new:.4g}")
    logger.info(f"Aggregated U = {U:.4g}")
    return ScalingReport(rows, U, spec)
