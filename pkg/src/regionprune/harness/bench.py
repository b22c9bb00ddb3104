"""Wall-clock measurement and the two-stage pipeline cost model.

Timing loops run strictly sequentially in one thread; medians are reported
with min/max dispersion because individual repetitions are noisy.
"""

from __future__ import annotations

import statistics
import time
from typing import Callable


def time_median_ms(fn: Callable[[], object], reps: int, *, warmup: int = 1) -> dict:
    """Median/min/max wall time of ``fn`` over ``reps`` sequential runs."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1000.0)
    return {"median_ms": statistics.median(times),
            "min_ms": min(times), "max_ms": max(times), "reps": reps}


def pipeline_latency(localizer_ms: float, backbone_ms: float, batches: int) -> dict:
    """Serial versus overlapped scheduling of the two stages over a stream
    of batches.

    Serial waits for localization before every backbone pass.  Overlapped
    localizes batch i+1 while the backbone runs batch i, so only the first
    localization is exposed; steady state costs max(localizer, backbone) per
    batch.
    """
    if batches < 1:
        raise ValueError("batches must be >= 1")
    if localizer_ms < 0 or backbone_ms < 0:
        raise ValueError("latencies must be nonnegative")
    serial = batches * (localizer_ms + backbone_ms)
    overlapped = localizer_ms + backbone_ms + (batches - 1) * max(localizer_ms, backbone_ms)
    return {
        "localizer_ms": localizer_ms,
        "backbone_ms": backbone_ms,
        "batches": batches,
        "serial_ms": serial,
        "overlapped_ms": overlapped,
        "saving_ms": serial - overlapped,
    }
