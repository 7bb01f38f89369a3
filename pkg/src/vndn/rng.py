"""Named deterministic random substreams.

Every random draw in a run flows from the scenario seed through a named
substream, so adding a node (which gets its own streams) cannot perturb the
draws other nodes see.
"""

from __future__ import annotations

import hashlib
import random


def substream(seed: int, *path: object) -> random.Random:
    material = repr((int(seed),) + tuple(str(p) for p in path)).encode("utf-8")
    digest = hashlib.sha256(material).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))
