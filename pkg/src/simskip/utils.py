"""Small shared helpers."""

import os

from .errors import ValidationError


def worker_count() -> int:
    """Number of worker threads for parallel-friendly operations.

    Capped by the SIMSKIP_THREADS environment variable; defaults to the
    machine's available parallelism.
    """
    raw = os.environ.get("SIMSKIP_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"SIMSKIP_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise ValidationError(f"SIMSKIP_THREADS must be >= 1, got {n}")
    return n
