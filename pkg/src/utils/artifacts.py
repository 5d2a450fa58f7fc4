"""
Artifact writers and the embedded expected-value tables
CSV and JSON outputs are written atomically with the run config echoed in
"""

import json
import logging
import os
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd

from src import __version__
from src.utils.logger import run_timestamp

logger = logging.getLogger(__name__)

EXPECTED_DIR = Path(__file__).parent.parent.parent / "data" / "expected"


class ArtifactWriter:
    """Writes CSV/JSON artifacts for one CLI run"""

    def __init__(self, command: str, run_config: dict, out_dir: Union[str, Path],
                 significant_digits: int = 6, full_precision: bool = False,
                 timestamp: bool = True, timezone: str = "UTC"):
        self.logger = logging.getLogger(__name__)
        self.command = command
        self.run_config = run_config
        self.out_dir = Path(out_dir)
        self.float_format = "%.17g" if full_precision else f"%.{significant_digits}g"
        self.timestamp = run_timestamp(timezone) if timestamp else None
        self.written = []

    def run_block(self) -> dict:
        block = {"command": self.command, "config": self.run_config, "version": __version__}
        if self.timestamp is not None:
            block["timestamp"] = self.timestamp
        return block

    def _atomic_write(self, path: Path, text: str):
        path.parent.mkdir(parents=True, exist_ok=True)
        temp_file = path.with_suffix(path.suffix + '.tmp')
        with open(temp_file, 'w', newline='') as f:
            f.write(text)
        os.replace(temp_file, path)
        self.written.append(str(path))
        self.logger.info(f"Wrote {path}")

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.out_dir / name
        header = f"# {json.dumps(self.run_block(), sort_keys=True, default=_jsonable)}\n"
        body = frame.to_csv(index=False, float_format=self.float_format, lineterminator="\n")
        self._atomic_write(path, header + body)
        return path

    def write_json(self, name: str, payload: dict) -> Path:
        path = self.out_dir / name
        document = {"run": self.run_block(), **payload}
        self._atomic_write(path, json.dumps(document, indent=2, sort_keys=True, default=_jsonable) + "\n")
        return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def read_artifact_csv(path: Union[str, Path]) -> pd.DataFrame:
    """Read a CSV artifact, skipping the run header line"""
    return pd.read_csv(path, comment="#")


def load_expected(table: Union[int, str], expected_dir: Optional[Path] = None) -> pd.DataFrame:
    """Expected values for one table with provenance columns"""
    path = Path(expected_dir or EXPECTED_DIR) / f"table{table}.csv"
    if not path.exists():
        raise FileNotFoundError(f"Expected-value file not found: {path}")
    frame = pd.read_csv(path, comment="#")
    logger.debug(f"Loaded {len(frame)} expected values from {path.name}")
    return frame


def summary_payload(summary, model=None) -> Dict:
    payload = {
        "sigma_ref": summary.sigma_ref,
        "null_dim_used": summary.null_dim_used,
        "numeric_null_dim": summary.numeric_null_dim,
        "diagnostics": summary.diagnostics,
    }
    if model is not None:
        payload["model"] = {
            "label": model.label,
            "class": model.model_class.value,
            "n1": model.lattice.n1,
            "n2": model.lattice.n2,
            "topology": model.lattice.topology.value,
        }
    return payload
