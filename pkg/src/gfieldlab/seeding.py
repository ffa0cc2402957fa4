"""Deterministic, scheduler-independent random number provisioning.

Monte Carlo work is split into fixed-size blocks of path indices.  Every
block owns a `SeedSequence` derived only from (master seed, block index),
never from the scenario, so

* path i consumes the same underlying normals under every scenario
  (common random numbers), and
* results are bit-identical for any worker count, because block streams
  do not depend on scheduling order.

Samplers must draw a fixed number of variates per path so that positional
alignment within a block is preserved across scenarios.
"""

from __future__ import annotations

from collections.abc import Iterator

import numpy as np

BLOCK_SIZE = 16384


def block_rng(master_seed: int, block_index: int) -> np.random.Generator:
    """Generator for one path block; depends only on (seed, block index)."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(block_index,))
    return np.random.default_rng(ss)


def path_blocks(
    master_seed: int, n_paths: int, block_size: int = BLOCK_SIZE
) -> Iterator[tuple[int, int, np.random.Generator]]:
    """Yield (start, stop, rng) covering range(n_paths) in fixed order."""
    if n_paths <= 0:
        raise ValueError(f"n_paths must be positive, got {n_paths}")
    for b, start in enumerate(range(0, n_paths, block_size)):
        stop = min(start + block_size, n_paths)
        yield start, stop, block_rng(master_seed, b)


def standard_normal_paths(
    master_seed: int, n_paths: int, shape_per_path: tuple[int, ...]
) -> np.ndarray:
    """Base normals of shape (n_paths, *shape_per_path), block-seeded.

    The result depends only on (seed, n_paths block coverage, shape), so two
    callers requesting the same shape see identical numbers path by path.
    """
    out = np.empty((n_paths, *shape_per_path))
    for start, stop, rng in path_blocks(master_seed, n_paths):
        out[start:stop] = rng.standard_normal((stop - start, *shape_per_path))
    return out
