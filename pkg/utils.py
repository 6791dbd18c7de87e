import os
import json
import math
import logging
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
import pandas as pd
import portalocker
from dotenv import load_dotenv

from errors import OutputError

load_dotenv()
# Configure logging
logging.basicConfig(level=logging.INFO, filename=os.getenv("SSF_LAB_LOG_FILE", "ssf_lab.log"), filemode="a", format="%(asctime)s - %(levelname)s - %(message)s", encoding="utf-8")
logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
REPORT_FORMATS = ("csv", "json")


def format_float(value: float) -> str:
    return FLOAT_FORMAT % value


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types only; complex numbers become {"re", "im"}, non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(float(obj.real)), "im": to_jsonable(float(obj.imag))}
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return obj


def _ensure_parent(path: str):
    parent = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(parent, exist_ok=True)
    except OSError as e:
        raise OutputError(f"cannot create output directory ({e})", parent) from e


def write_json(obj: Any, path: str) -> None:
    _ensure_parent(path)
    text = json.dumps(to_jsonable(obj), indent=2, ensure_ascii=False) + "\n"
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            portalocker.lock(f, portalocker.LOCK_EX)
            f.write(text)
            portalocker.unlock(f)
    except OSError as e:
        logger.error(f"[Report] Error writing {path}: {e}")
        raise OutputError(f"cannot write JSON ({e})", path) from e


def read_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            portalocker.lock(f, portalocker.LOCK_SH)
            data = json.load(f)
            portalocker.unlock(f)
        return data
    except OSError as e:
        raise OutputError(f"cannot read JSON ({e})", path) from e


def write_csv(frame: pd.DataFrame, path: str) -> None:
    _ensure_parent(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            portalocker.lock(f, portalocker.LOCK_EX)
            frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
            portalocker.unlock(f)
    except OSError as e:
        logger.error(f"[Report] Error writing {path}: {e}")
        raise OutputError(f"cannot write CSV ({e})", path) from e


def rows_to_frame(rows: Iterable[Dict[str, Any]], columns: Optional[List[str]] = None) -> pd.DataFrame:
    rows = list(rows)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    return pd.DataFrame(rows, columns=columns)


def emit_report(report: Any, format: str, path: str, columns: Optional[List[str]] = None) -> None:
    """Serialize a report object, frame, dict or row list to CSV or JSON at path."""
    if format not in REPORT_FORMATS:
        raise OutputError(f"unknown report format '{format}'", path)
    if format == "json":
        payload = report.to_dict() if hasattr(report, "to_dict") and not isinstance(report, pd.DataFrame) else report
        if isinstance(payload, pd.DataFrame):
            payload = payload.to_dict(orient="records")
        write_json(payload, path)
    else:
        if isinstance(report, pd.DataFrame):
            frame = report
        elif hasattr(report, "to_frame"):
            frame = report.to_frame()
        else:
            frame = rows_to_frame(report, columns)
        if columns is not None:
            frame = frame.reindex(columns=columns)
        write_csv(frame, path)
    logger.info(f"[Report] Wrote {format.upper()} report to {path}")
