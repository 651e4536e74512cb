"""Named random substreams derived from a single root seed.

Every source of randomness in the pipeline (map sampling, actor scripts,
observation noise, weight init, batch shuffling, dropout) pulls its own
generator from the root seed via a stable name, so runs are reproducible
and adding a consumer never perturbs the others.
"""

import hashlib

import numpy as np


def _name_to_entropy(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(root_seed: int, *names: str) -> np.random.Generator:
    """Return an independent generator for the given substream name(s)."""
    entropy = [int(root_seed)] + [_name_to_entropy(n) for n in names]
    return np.random.default_rng(np.random.SeedSequence(entropy))
