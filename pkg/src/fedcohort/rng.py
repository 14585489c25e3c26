"""Deterministic, path-keyed random streams.

Every random draw in the simulator comes from a stream derived from
``(master_seed, path)`` where ``path`` is a tuple of integer tags such as
``(PATH_CLIENT, round, client_tag)``. Streams with distinct paths are
statistically independent and the mapping is a pure function, so per-client
randomness does not depend on execution order or worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np

# Purpose tags: the first path element keeps the draw domains disjoint.
PATH_INIT = 0  # model initialization
PATH_DATA = 1  # synthetic dataset generation
PATH_COHORT = 2  # per-round cohort sampling
PATH_CLIENT = 3  # per-(round, client) local training
PATH_RUNTIME = 4  # per-(round, client) straggler runtime draw


def derive_stream(master_seed: int, path: tuple[int, ...]) -> np.random.Generator:
    """Return the generator keyed by (master_seed, path).

    Same inputs give a bit-identical stream of draws; distinct paths give
    independent streams (SeedSequence spawn-key hashing).
    """
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(int(t) for t in path))
    return np.random.Generator(np.random.PCG64(seq))


def client_tag(client_id: str) -> int:
    """Stable 64-bit path tag for a string client id."""
    digest = hashlib.blake2b(client_id.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")
