import os
import json
import logging
import subprocess
from typing import List, Dict, Any, Optional

import numpy as np
import pandas as pd

LOGGER_NAME = "oofsk"
PACKAGE_VERSION = "0.3.0"

logger = logging.getLogger(LOGGER_NAME)


def configure_logging(level: str = "INFO"):
    """Attach a single stderr handler to the engine logger"""
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(
            "[%(asctime)s] %(levelname)s: %(message)s", "%Y-%m-%d %H:%M:%S"
        ))
        logger.addHandler(handler)
    logger.setLevel(getattr(logging, level.upper(), logging.INFO))


def log_message(message: str, level: str = "INFO"):
    """Log through the engine logger"""
    logger.log(getattr(logging, level.upper(), logging.INFO), message)


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    """10 log10 of a positive value; +inf for +inf and -inf for 0"""
    if value == 0:
        return float("-inf")
    if value < 0 or np.isnan(value):
        raise ValueError(f"Cannot express {value} in dB")
    return float(10.0 * np.log10(value))


def parse_snr_grid(text: str) -> List[float]:
    """Parse an SNR grid in dB: 'start:stop:step' or a comma list"""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ValueError(f"Invalid SNR grid: {text}")
        start, stop, step = parts
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + k * step for k in range(count)]
    values = [float(p) for p in text.split(",") if p.strip()]
    if not values:
        raise ValueError(f"Invalid SNR grid: {text}")
    return sorted(values)


def get_version() -> str:
    """git describe of the working tree, or the package version outside git"""
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        )
        if result.returncode == 0 and result.stdout.strip():
            return result.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return PACKAGE_VERSION


def write_csv(rows: List[Dict[str, Any]], path: str, columns: List[str],
              metadata: Optional[Dict[str, Any]] = None) -> str:
    """Write rows to CSV in full precision plus a .meta.json sidecar"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)

    frame = pd.DataFrame(rows, columns=columns)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")

    sidecar = dict(metadata or {})
    sidecar.setdefault("version", get_version())
    sidecar["columns"] = columns
    sidecar["rows"] = len(rows)
    meta_path = os.path.splitext(path)[0] + ".meta.json"
    with open(meta_path, "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True, default=str)

    log_message(f"Wrote {len(rows)} rows to {path}")
    return meta_path
