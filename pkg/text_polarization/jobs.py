import logging
from concurrent.futures import ThreadPoolExecutor

logger = logging.getLogger(__name__)


def run_per_event(func, items: dict, jobs: int = 1) -> dict:
    """
    Call func(key, value) for every item on up to `jobs` threads.
    Results are merged in sorted key order; the first worker exception
    is raised in the caller.
    """
    keys = sorted(items)
    if jobs <= 1 or len(keys) <= 1:
        return {key: func(key, items[key]) for key in keys}
    with ThreadPoolExecutor(max_workers=jobs,
                            thread_name_prefix='textpolar') as executor:
        futures = {key: executor.submit(func, key, items[key])
                   for key in keys}
        res = {}
        for key in keys:
            res[key] = futures[key].result()
            logger.debug("Event %s done.", key)
    return res
