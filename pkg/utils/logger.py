import logging
import time
from contextlib import contextmanager
from typing import Iterator

def log_function_call(logger: logging.Logger, func_name: str, **kwargs):
    """
    Log a command or service call with its parameters.
    
    Args:
        logger: Logger instance
        func_name: Name of the function being called
        **kwargs: Function parameters to log
    """
    params = ", ".join([f"{k}={v}" for k, v in kwargs.items()])
    logger.debug(f"Calling {func_name}({params})")

@contextmanager
def log_duration(logger: logging.Logger, what: str, level: int = logging.INFO) -> Iterator[dict]:
    """
    Time a block and log its wall time on exit.

    Yields a dict whose "seconds" key is filled once the block finishes.
    """
    timing = {"seconds": None}
    start = time.perf_counter()
    try:
        yield timing
    finally:
        timing["seconds"] = time.perf_counter() - start
        logger.log(level, f"{what} took {timing['seconds']:.3f}s")
