import os

THREADS_ENV = "GRIDPULSE_THREADS"


def thread_count() -> int:
    """Worker cap from ``GRIDPULSE_THREADS``; defaults to the CPU count."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        return n
    return os.cpu_count() or 1
