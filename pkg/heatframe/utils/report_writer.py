"""
CSV and JSON report output. CSVs are flat, header-first, CRLF-terminated and carry
17 significant digits so repeated runs produce byte-identical files.
"""
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Union

import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

PathLike = Union[str, Path]


def write_csv(rows: Iterable[Mapping[str, Any]], path: PathLike,
              columns: Optional[List[str]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(list(rows), columns=columns)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\r\n")
    logger.info(f"Wrote {len(df)} rows to {path}")
    return path


def read_csv(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def _plain(value: Any) -> Any:
    if hasattr(value, "model_dump"):
        return value.model_dump(mode="json", by_alias=True)
    if hasattr(value, "tolist"):
        return value.tolist()
    return str(value)


def write_json(payload: Dict[str, Any], path: PathLike, timestamp: bool = True) -> Path:
    """JSON summary; summaries (unlike CSVs) carry the evaluation timestamp."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if timestamp:
        payload = {"evaluation_timestamp": datetime.now().isoformat(), **payload}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, default=_plain)
    logger.info(f"Wrote report {path}")
    return path


def append_run_record(record: Dict[str, Any], log_dir: PathLike) -> None:
    """One JSON line per CLI run in <log_dir>/runs.json."""
    path = Path(log_dir) / "runs.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps({"timestamp": datetime.now().isoformat(), **record}, default=_plain) + "\n")
