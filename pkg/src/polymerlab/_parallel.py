"""Replica fan-out helper.

Replicas are pure functions of their derived seed, so any execution order or
worker count yields identical results; outputs are always reassembled in
argument order.
"""

from __future__ import annotations

import multiprocessing as mp


def map_replicas(fn, args_list, workers: int = 1) -> list:
    """Apply ``fn`` to each argument tuple, optionally on a process pool."""
    if workers <= 1 or len(args_list) <= 1:
        return [fn(a) for a in args_list]
    with mp.get_context("spawn").Pool(processes=workers) as pool:
        return pool.map(fn, args_list)
