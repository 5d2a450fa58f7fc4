"""
Table reproduction - computes the reference-sigma and scaling tables and diffs
them against the embedded expected values
"""

import logging
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.core.builders import TORUS2_VARIANTS, ModelClass, build_model, parse_model_class
from src.core.errors import ConfigError, NumericalError
from src.core.scaling import scaling_pipeline
from src.core.spectral import model_summary
from src.utils.artifacts import load_expected

logger = logging.getLogger(__name__)

TABLE_IDS = (1, 2, 3, 4)
STANDARD_GRID_NODES = (11, 20, 40)
LONG_GRID_NODES = (100,)
TABLE_TOLERANCE = {1: 0.01, 2: 0.01, 3: 0.02, 4: 0.01}
# only the Bound 1 column has a fixed construction; the others are reported, not pinned
PINNED_TABLE1 = {"bound1"}


class SigmaRefCalculator:
    """Memoised sigma_ref per (class, nodes, null_dim, options)"""

    def __init__(self, config: Optional[dict] = None, long_running: bool = False):
        spectral = (config or {}).get("spectral", {})
        self.long_running = long_running
        self.solver_options = {
            "max_dimension": spectral.get("max_dimension", 12000),
            "long_running_dimension": spectral.get("long_running_dimension", 2500),
            "rel_tol": spectral.get("rel_tol", 1e-8),
        }
        self.build_options = {
            "torus2_variant": spectral.get("torus2_variant", "corners_bounded"),
            "cross_weight": spectral.get("bound2_cross_weight", 2.0),
        }
        self._cache: Dict[Tuple, float] = {}

    def sigma_ref(self, model_class, nodes: int, null_dim: Optional[int] = None, **options) -> float:
        cls = parse_model_class(model_class)
        build_options = {**self.build_options, **options}
        key = (cls, nodes, null_dim, tuple(sorted(build_options.items())))
        if key not in self._cache:
            model = build_model(cls, nodes, None, null_dim, **build_options)
            _, summary = model_summary(model, long_running=self.long_running, **dict(self.solver_options))
            self._cache[key] = summary.sigma_ref
        return self._cache[key]

    def triple(self, nodes: int) -> Dict[str, float]:
        """sigma_ref of rw1, rw2 and the bounded 2D field at one node count"""
        return {
            "rw1": self.sigma_ref(ModelClass.RW1, nodes),
            "rw2": self.sigma_ref(ModelClass.RW2, nodes),
            "rw2d": self.sigma_ref(ModelClass.BOUND1, nodes),
        }


def _compare(frame: pd.DataFrame, tolerance: float) -> pd.DataFrame:
    frame = frame.copy()
    frame["abs_dev"] = (frame["computed"] - frame["expected"]).abs()
    # NaN deviations compare False, so failed computations never pass
    frame["ok"] = frame["abs_dev"] <= tolerance + 1e-12
    return frame


def _safe_triple(calc: SigmaRefCalculator, nodes: int, table_id: int) -> Tuple[Dict[str, float], str]:
    try:
        return calc.triple(nodes), ""
    except NumericalError as e:
        logger.warning(f"Table {table_id} at {nodes} nodes failed: {e}")
        return {"rw1": np.nan, "rw2": np.nan, "rw2d": np.nan}, str(e)


def reproduce_table1(calc: SigmaRefCalculator) -> pd.DataFrame:
    nodes = STANDARD_GRID_NODES + (LONG_GRID_NODES if calc.long_running else ())
    expected = load_expected(1)
    expected = expected[expected["nodes"].isin(nodes)]
    computed, notes = [], []
    for _, row in expected.iterrows():
        try:
            computed.append(calc.sigma_ref(row["model"], int(row["nodes"])))
            notes.append("")
        except NumericalError as e:
            logger.warning(f"Table 1 {row['model']} at {row['nodes']} nodes failed: {e}")
            computed.append(np.nan)
            notes.append(str(e))
    frame = expected.assign(computed=computed, note=notes)
    frame = _compare(frame, TABLE_TOLERANCE[1])
    frame["pinned"] = frame["model"].isin(PINNED_TABLE1)
    return frame


def reproduce_table2(calc: SigmaRefCalculator) -> pd.DataFrame:
    expected = load_expected(2)
    computed, notes = [], []
    for n, m in zip(expected["nodes"], expected["model"]):
        sigmas, note = _safe_triple(calc, int(n), 2)
        computed.append(sigmas[m])
        notes.append(note)
    frame = expected.assign(computed=computed, note=notes)
    return _compare(frame, TABLE_TOLERANCE[2]).assign(pinned=True)


def _scaled(b: float, mu: float, alpha: float, sigmas: List[Tuple[str, float]],
            models: Iterable[str]) -> List[float]:
    if any(np.isnan(s) for _, s in sigmas):
        return [np.nan for _ in models]
    report = scaling_pipeline(b, mu, alpha, sigmas)
    return [report.b_new(m) for m in models]


def reproduce_table3(calc: SigmaRefCalculator, mu: float, alpha: float) -> pd.DataFrame:
    expected = load_expected(3)
    computed, notes = [], []
    for (nodes, b), group in expected.groupby(["nodes", "b"], sort=False):
        sigmas, note = _safe_triple(calc, int(nodes), 3)
        computed.extend(_scaled(float(b), mu, alpha, list(sigmas.items()), group["model"]))
        notes.extend(note for _ in group["model"])
    frame = expected.assign(computed=computed, note=notes)
    return _compare(frame, TABLE_TOLERANCE[3]).assign(pinned=True)


def reproduce_table4(calc: SigmaRefCalculator, mu: float, alpha: float, nodes: int = 11) -> pd.DataFrame:
    expected = load_expected(4)
    sigmas, note = _safe_triple(calc, nodes, 4)
    pair = [("rw2", sigmas["rw2"]), ("rw2d", sigmas["rw2d"])]
    computed = []
    for b, group in expected.groupby("b", sort=False):
        computed.extend(_scaled(float(b), mu, alpha, pair, group["model"]))
    frame = expected.assign(computed=computed, note=note)
    return _compare(frame, TABLE_TOLERANCE[4]).assign(pinned=True)


def reproduce_table(table_id: int, calc: SigmaRefCalculator, mu: float = 7.0, alpha: float = 0.001) -> pd.DataFrame:
    if table_id not in TABLE_IDS:
        raise ConfigError(f"Unknown table {table_id}, expected one of {TABLE_IDS}")
    if table_id == 1:
        return reproduce_table1(calc)
    if table_id == 2:
        return reproduce_table2(calc)
    if table_id == 3:
        return reproduce_table3(calc, mu, alpha)
    return reproduce_table4(calc, mu, alpha)


def table1_variant_report(calc: SigmaRefCalculator, nodes: Iterable[int] = STANDARD_GRID_NODES) -> pd.DataFrame:
    """sigma_ref of every construction variant next to the Table 1 columns.

    Columns without a fixed construction (Torus 1, Torus 2, Bound 2)
    are matched against each variant within +-0.02.
    """
    expected = load_expected(1).set_index(["nodes", "model"])["expected"]
    variants: List[Tuple[str, str, Optional[int], dict]] = [
        ("torus1", "torus1", 1, {}),
        ("torus1", "torus1", 3, {}),
        ("bound1", "bound1", 3, {}),
        ("bound2", "bound2", 3, {}),
        ("bound2", "tensor_rw2", 4, {}),
    ]
    for variant in TORUS2_VARIANTS:
        for k in (1, 3):
            variants.append(("torus2", "torus2", k, {"torus2_variant": variant}))

    rows = []
    for n in nodes:
        for column, model, k, options in variants:
            note = ""
            try:
                value = calc.sigma_ref(model, n, k, **options)
            except NumericalError as e:
                value, note = np.nan, str(e)
            target = expected.get((n, column), np.nan)
            name = model + (f"[{options['torus2_variant']}]" if options else "")
            rows.append({
                "nodes": n,
                "column": column,
                "variant": name,
                "null_dim": k,
                "computed": value,
                "expected": target,
                "abs_dev": abs(value - target),
                "match": bool(abs(value - target) <= 0.02),
                "note": note,
            })
    frame = pd.DataFrame(rows)
    for column, group in frame.groupby("column"):
        if not group["match"].any():
            logger.warning(f"No construction variant matches the {column} column; see deviation report")
    return frame
