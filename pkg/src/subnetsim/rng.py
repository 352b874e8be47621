"""Named, independent random substreams derived from one master seed.

Every stochastic subsystem (deployment, shadowing, fading, plant noise,
policy randomness, error draws) owns its own stream so that competing
policies evaluated on the same episode see identical environment
realizations, and so results never depend on worker count or scheduling.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream"]


def substream(master_seed: int, label: str, episode: int = 0) -> np.random.Generator:
    """Return the generator for (master_seed, label, episode).

    Streams are derived by hashing the triple, so adding or removing draws
    on one stream can never shift the values produced by another.
    """
    key = f"{master_seed}:{label}:{episode}".encode()
    digest = hashlib.sha256(key).digest()
    return np.random.default_rng(int.from_bytes(digest[:16], "little"))
