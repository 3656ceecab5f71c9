"""Counter-based normal streams keyed by (seed, purpose, component, path block).

Paths are produced in fixed blocks of ``PATH_BLOCK`` rows.  Every block owns a
Philox generator seeded from the key tuple, so path p depends only on the key
and p, never on how blocks are distributed over workers.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

PATH_BLOCK = 1024

# purpose tags; part of the key so unrelated experiments never share draws
PATHS = 0
INCREMENTS = 1
PAIRING = 2


def worker_count(workers=None):
    if workers is not None:
        return max(1, int(workers))
    try:
        return max(1, int(os.environ.get("CURRENTS_WORKERS", "1")))
    except ValueError:
        return 1


def block_generator(seed, purpose, component, block):
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(purpose), int(component), int(block)])
    return np.random.Generator(np.random.Philox(ss))


def stream_id(seed, purpose, component):
    return f"philox/{int(seed)}/{int(purpose)}/{int(component)}"


def n_blocks(n_paths):
    return (int(n_paths) + PATH_BLOCK - 1) // PATH_BLOCK


def block_rows(block, n_paths):
    start = block * PATH_BLOCK
    return start, min(start + PATH_BLOCK, int(n_paths))


def map_blocks(fn, n_paths, workers=None):
    """Apply ``fn(block, start, stop)`` to every path block; results in block order."""
    blocks = range(n_blocks(n_paths))
    args = [(b, *block_rows(b, n_paths)) for b in blocks]
    w = worker_count(workers)
    if w == 1 or len(args) == 1:
        return [fn(*a) for a in args]
    with ThreadPoolExecutor(max_workers=w) as ex:
        return list(ex.map(lambda a: fn(*a), args))


def standard_normals(seed, purpose, component, n_paths, width, workers=None):
    """(n_paths, width) standard normals, identical for any worker count."""
    out = np.empty((int(n_paths), int(width)))

    def fill(block, start, stop):
        g = block_generator(seed, purpose, component, block)
        out[start:stop] = g.standard_normal((stop - start, int(width)))

    map_blocks(fill, n_paths, workers)
    return out
