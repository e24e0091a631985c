"""
Approximate peak-memory measurement around a closure.

On Linux the closure runs in a forked child. The child resets its resident
high-water mark (``/proc/self/clear_refs``), notes its current resident
size, runs the closure and reports ``VmHWM - VmRSS(before)``. Running in a
fresh child keeps earlier allocations of the parent (and the allocator's
retained free lists) out of the figure. Where the reset is refused, a
background thread samples ``VmRSS`` instead. On platforms without
``/proc`` the peak is reported as ``None``.

Numbers are coarse and only meant for relative comparisons.
"""

from __future__ import annotations

import multiprocessing as mp
import os
import threading
import time
import traceback
from dataclasses import dataclass
from typing import Any, Callable

_STATUS = "/proc/self/status"


@dataclass
class Measurement:
    result: Any
    peak_bytes: int | None
    wall_time: float


def _status_kib(field: str) -> int | None:
    try:
        with open(_STATUS) as fh:
            for line in fh:
                if line.startswith(field + ":"):
                    return int(line.split()[1])
    except OSError:
        return None
    return None


def _reset_high_water_mark() -> bool:
    try:
        with open("/proc/self/clear_refs", "w") as fh:
            fh.write("5")
        return True
    except OSError:
        return False


class _Sampler(threading.Thread):
    def __init__(self, interval=0.001):
        super().__init__(daemon=True)
        self.interval = interval
        self.peak = _status_kib("VmRSS") or 0
        self._stop_event = threading.Event()

    def run(self):
        while not self._stop_event.is_set():
            rss = _status_kib("VmRSS")
            if rss is not None and rss > self.peak:
                self.peak = rss
            time.sleep(self.interval)

    def stop(self):
        self._stop_event.set()
        self.join()


def _measure_here(fn: Callable[[], Any]) -> Measurement:
    before = _status_kib("VmRSS")
    if before is None:
        t0 = time.perf_counter()
        result = fn()
        return Measurement(result, None, time.perf_counter() - t0)
    if _reset_high_water_mark():
        before = _status_kib("VmRSS")
        t0 = time.perf_counter()
        result = fn()
        wall = time.perf_counter() - t0
        peak = _status_kib("VmHWM")
    else:
        sampler = _Sampler()
        sampler.start()
        t0 = time.perf_counter()
        try:
            result = fn()
        finally:
            sampler.stop()
        wall = time.perf_counter() - t0
        peak = max(sampler.peak, _status_kib("VmRSS") or 0)
    return Measurement(result, max(0, peak - before) * 1024, wall)


def _child(fn, conn):
    try:
        m = _measure_here(fn)
        conn.send(("ok", m))
    except BaseException as exc:  # noqa: BLE001 - relayed to the parent
        try:
            conn.send(("error", exc))
        except Exception:
            conn.send(("error", RuntimeError(traceback.format_exc())))
    finally:
        conn.close()


def measure_peak_memory(fn: Callable[[], Any], isolate: bool = True) -> Measurement:
    """Run ``fn()`` and return its result with peak extra resident bytes and wall time.

    With ``isolate`` (the default) the closure runs in a forked child so
    measurements of consecutive runs do not contaminate each other; the
    result must then be picklable. Exceptions raised by ``fn`` are re-raised
    in the caller.
    """
    if not isolate or "fork" not in mp.get_all_start_methods() or not os.path.exists(_STATUS):
        return _measure_here(fn)
    ctx = mp.get_context("fork")
    parent, child = ctx.Pipe(duplex=False)
    proc = ctx.Process(target=_child, args=(fn, child))
    proc.start()
    child.close()
    try:
        status, payload = parent.recv()
    except EOFError:
        proc.join()
        raise RuntimeError(f"measurement child exited with code {proc.exitcode}") from None
    proc.join()
    if status == "error":
        raise payload
    return payload
