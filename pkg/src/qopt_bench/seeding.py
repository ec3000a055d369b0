"""Deterministic derivation of independent random streams.

All randomness in the project flows through named streams derived from a
single master seed.  Derivation hashes the label path, not a counter, so
adding a method or a worker never shifts the seeds of unrelated streams,
and results are independent of scheduling order.

Generator choice: numpy PCG64 (64-bit, portable, jumpable).  The seed for
a stream is the first 8 bytes (little-endian) of
``sha256("<master>/<label>/<label>/...")``.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, *labels: object) -> int:
    """64-bit child seed for the stream named by ``labels``."""
    path = "/".join([str(int(master))] + [str(lab) for lab in labels])
    digest = hashlib.sha256(path.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream(master: int, *labels: object) -> np.random.Generator:
    """Independent PCG64 generator for the stream named by ``labels``."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, *labels)))
