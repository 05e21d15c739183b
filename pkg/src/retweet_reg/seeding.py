"""Named sub-seed derivation so every source of randomness in a run flows
from the single seed in the run configuration.
"""

import hashlib


def derive_seed(base_seed: int, name: str) -> int:
    """Derive a stable 63-bit sub-seed from a base seed and a purpose name.

    Uses SHA-256 rather than hash() so the value is identical across
    processes and platforms.
    """
    digest = hashlib.sha256(f"{base_seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & 0x7FFFFFFFFFFFFFFF
