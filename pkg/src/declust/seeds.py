"""Deterministic sub-seed derivation.

Every random decision in the library flows from one master seed through
named sub-seeds, so any stage of a run can be reproduced in isolation.
"""

import hashlib


def derive(master_seed: int, *names: object) -> int:
    """Derive a named 63-bit sub-seed from a master seed.

    The same (master_seed, names) pair always yields the same seed; distinct
    name paths yield independent-looking seeds.
    """
    key = repr((int(master_seed),) + tuple(str(n) for n in names))
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFF_FFFF_FFFF_FFFF
