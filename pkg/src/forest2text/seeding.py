"""Deterministic seed derivation.

Every stage of a run draws its randomness from a single base seed through
``derive_seed``, so one number reproduces a whole experiment. Derivation is
hash-based (stage name plus indices), which keeps derived streams
decorrelated and identical across platforms.
"""

import hashlib


def derive_seed(base: int, *parts: str | int) -> int:
    """Return a 64-bit seed derived from ``base`` and a path of stage labels."""
    h = hashlib.sha256()
    h.update(str(int(base)).encode("ascii"))
    for part in parts:
        h.update(b"/")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")
