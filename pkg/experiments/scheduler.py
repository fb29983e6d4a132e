"""
Grid scheduler: dispatches independent grid points to a worker pool and
merges the results in key order
"""

import logging
from typing import Any, Callable, Dict, Hashable, Iterable, List, Tuple

from joblib import Parallel, delayed

logger = logging.getLogger(__name__)


def run_grid(
    points: Iterable[Tuple[Hashable, tuple]],
    task: Callable[..., Any],
    threads: int = 1,
) -> List[Tuple[Hashable, Any]]:
    """
    Evaluate task(*args) for every (key, args) point.

    Results come back sorted by key whatever order the workers finish in.
    """
    points = list(points)
    if not points:
        return []
    logger.info(f"Scheduling {len(points)} grid points on {threads} worker(s)")
    if threads > 1:
        results = Parallel(n_jobs=threads, prefer="threads")(
            delayed(task)(*args) for _, args in points
        )
    else:
        results = [task(*args) for _, args in points]
    merged: Dict[Hashable, Any] = {key: result for (key, _), result in zip(points, results)}
    return sorted(merged.items(), key=lambda item: item[0])
