"""
Result writers for the experiment runner
"""

import json
import logging
from pathlib import Path
from typing import Any, List, Sequence, Set, Tuple

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _plain(value: Any) -> Any:
    """numpy scalars/arrays and complex numbers as JSON-ready values"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, np.floating):
        return float(value)
    return value


class ResultStorage:
    """CSV/JSON output with key-sorted, resumable tables"""

    @staticmethod
    def prepare(out_dir) -> Path:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        return path

    @staticmethod
    def write_csv(frame: pd.DataFrame, path: Path, keys: Sequence[str] = ()) -> Path:
        if keys:
            frame = frame.sort_values(list(keys), kind="stable").reset_index(drop=True)
        frame.to_csv(path, float_format=FLOAT_FORMAT, index=False)
        logger.info(f"Wrote {len(frame)} rows to {path}")
        return path

    @staticmethod
    def write_json(payload: Any, path: Path) -> Path:
        path.write_text(json.dumps(_plain(payload), sort_keys=True, indent=2) + "\n")
        logger.info(f"Wrote {path}")
        return path

    @staticmethod
    def load_existing(path: Path) -> pd.DataFrame:
        if not path.exists():
            return pd.DataFrame()
        try:
            return pd.read_csv(path)
        except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
            logger.warning(f"Ignoring unreadable partial output {path}: {e}")
            return pd.DataFrame()

    @staticmethod
    def finished_keys(frame: pd.DataFrame, keys: Sequence[str]) -> Set[Tuple]:
        if frame.empty or any(k not in frame.columns for k in keys):
            return set()
        return set(frame[list(keys)].itertuples(index=False, name=None))

    @staticmethod
    def merge_csv(
        path: Path, existing: pd.DataFrame, new_rows: List[pd.DataFrame], keys: Sequence[str]
    ) -> pd.DataFrame:
        """Union of old and new rows, one row per key, sorted by key"""
        frames = [f for f in [existing, *new_rows] if not f.empty]
        if not frames:
            return pd.DataFrame()
        merged = pd.concat(frames, ignore_index=True).drop_duplicates(list(keys), keep="first")
        ResultStorage.write_csv(merged, path, keys)
        return merged.sort_values(list(keys), kind="stable").reset_index(drop=True)
