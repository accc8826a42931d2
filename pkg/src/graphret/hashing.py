"""Stable 64-bit hashing for feature buckets, sign flips, and seed derivation.

Python's builtin ``hash`` is salted per process, so everything that has to be
reproducible across runs and platforms goes through FNV-1a instead.  The
function is fixed for the lifetime of the on-disk formats: changing it would
silently invalidate every stored embedding.

Test vectors (FNV-1a, 64 bit):

    fnv1a64(b"")       == 0xcbf29ce484222325
    fnv1a64(b"a")      == 0xaf63dc4c8601ec8c
    fnv1a64(b"foobar") == 0x85944171f73967e8
"""

from __future__ import annotations

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

# Prefix mixed into the hash input when deciding the sign of a feature, so the
# sign is decorrelated from the bucket choice.
_SIGN_PREFIX = b"sign\x00"


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of ``data``."""
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


def token_bucket(token: str, n_buckets: int) -> int:
    """Bucket index for a token: fnv1a64 of its UTF-8 bytes, mod ``n_buckets``."""
    if n_buckets < 1:
        raise ValueError("n_buckets must be >= 1")
    return fnv1a64(token.encode("utf-8")) % n_buckets


def token_sign(token: str) -> float:
    """Sign flip for a token: +1.0 if fnv1a64(b"sign\\x00" + utf8) is even, else -1.0."""
    h = fnv1a64(_SIGN_PREFIX + token.encode("utf-8"))
    return 1.0 if (h & 1) == 0 else -1.0


def derive_seed(master_seed: int, stage: str) -> int:
    """Fan a single pipeline seed out into independent per-stage seeds.

    The derived seed is fnv1a64 of ``"<master_seed>:<stage>"`` folded to 31
    bits (so it is valid for every RNG that wants a non-negative int32).
    """
    return fnv1a64(f"{master_seed}:{stage}".encode("utf-8")) & 0x7FFFFFFF
