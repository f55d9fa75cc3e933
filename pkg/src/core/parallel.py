"""
Worker-pool helpers
Work units are mapped in order, so results never depend on the number of workers
"""

import logging
import os
from typing import Callable, List, Optional, Sequence, TypeVar

from joblib import Parallel, delayed

from .errors import ConfigError

logger = logging.getLogger(__name__)

JOBS_ENV_VAR = "DIALEX_JOBS"

T = TypeVar("T")
R = TypeVar("R")


def resolve_jobs(jobs: Optional[int] = None) -> int:
    """Worker count from the flag, then the DIALEX_JOBS variable, then 1"""
    if jobs is None:
        raw = os.environ.get(JOBS_ENV_VAR)
        if raw is None or raw.strip() == "":
            return 1
        try:
            jobs = int(raw)
        except ValueError as exc:
            raise ConfigError(f"{JOBS_ENV_VAR} must be an integer, got {raw!r}") from exc
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")
    return jobs


def ordered_map(func: Callable[[T], R], items: Sequence[T], jobs: int = 1) -> List[R]:
    """Apply func to every item, in parallel when jobs > 1, returning results in input order"""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    workers = min(jobs, len(items))
    logger.debug("mapping %d work units over %d workers", len(items), workers)
    return Parallel(n_jobs=workers)(delayed(func)(item) for item in items)
