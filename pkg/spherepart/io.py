"""
Reading and writing pipeline artifacts.

JSON files are written with sorted keys so equal runs give equal bytes;
non-finite floats are stored as the strings 'inf' / '-inf' and NaN as null.
CSV files go through pandas with round-trip float precision.
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd
import yaml

from .logger import setup_logger
from .partition import Partition
from .transport import DualWeights, SolveReport

logger = setup_logger(__name__)

DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / 'config.yaml'
FLOAT_FORMAT = '%.17g'


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    return value


def write_json(data: Dict, path: Path) -> Path:
    """Write a dict as sorted, indented JSON (parent directories created)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(_jsonable(data), f, indent=2, sort_keys=True, allow_nan=False)
        f.write('\n')
    logger.debug(f"Wrote {path}")
    return path


def read_json(path: Path) -> Dict:
    with open(path, 'r') as f:
        return json.load(f)


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    """Write a table as CSV with full float precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.debug(f"Wrote {path}")
    return path


def load_config(path: Optional[Path] = None) -> Dict:
    """
    Load run defaults from YAML.

    Args:
        path: Config file (None = config.yaml at the repository root,
              silently empty when that file does not exist)

    Returns:
        Dict with a 'global' section and one section per subcommand
    """
    if path is None:
        if not DEFAULT_CONFIG.exists():
            return {}
        path = DEFAULT_CONFIG
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    with open(path, 'r') as f:
        config = yaml.safe_load(f) or {}
    if not isinstance(config, dict):
        raise ValueError(f"Config {path} must be a mapping, got {type(config).__name__}")
    return config


def save_weights(weights: DualWeights, report: SolveReport, path: Path) -> Path:
    return write_json({'weights': weights.to_dict(), 'report': report.to_dict()}, path)


def load_weights(path: Path) -> Tuple[DualWeights, SolveReport]:
    data = read_json(path)
    return DualWeights.from_dict(data['weights']), SolveReport.from_dict(data['report'])


def save_partition(part: Partition, path: Path, points_csv: bool = True) -> Path:
    """Write partition.json and, next to it, partition_points.csv."""
    path = write_json(part.to_dict(), path)
    if points_csv:
        part.to_points_csv(path.with_name('partition_points.csv'))
    return path


def load_partition(path: Path) -> Partition:
    """Read partition.json; the quadrature is regenerated from its recorded seed."""
    data = read_json(path)
    if data['quad']['seed'] < 0:
        raise ValueError(f"Partition {path} was built on a quadrature without a seed and cannot be reloaded")
    return Partition.from_dict(data)
