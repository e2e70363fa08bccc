"""Published reference values used as benchmark targets.

Each G-set row holds ``(n, density, QIS3 cut, DAv2 cut, DAv3 cut)``;
``None`` marks a solver that could not run the instance.
"""

from __future__ import annotations

GSET_TABLE = {
    "G11": (800, 0.005, 564, 564, 564),
    "G32": (2000, 0.002, 1404, 1410, 1410),
    "G48": (3000, 0.0013, 6000, 6000, 6000),
    "G57": (5000, 0.0008, 3466, 3470, 3482),
    "G62": (7000, 0.0006, 4828, 4838, 4846),
    "G65": (8000, 0.0005, 5502, 5460, 5534),
    "G66": (9000, 0.0004, 6288, None, 6180),
    "G72": (10000, 0.0004, 6916, None, 6728),
    "G14": (800, 0.0147, 3060, 3064, 3064),
    "G51": (1000, 0.0118, 3846, 3848, 3848),
    "G35": (2000, 0.0059, 7673, 7686, 7686),
    "G58": (5000, 0.0024, 19216, 19262, 19263),
    "G63": (7000, 0.0017, 26949, 27012, 27003),
    "G1": (800, 0.06, 11624, 11624, 11624),
    "G43": (1000, 0.02, 6660, 6660, 6660),
    "G22": (2000, 0.01, 13358, 13359, 13359),
}


def best_known_cut(name: str) -> int:
    """Largest cut among the published solvers for a G-set instance."""
    row = GSET_TABLE[name]
    return max(c for c in row[2:] if c is not None)


# win / tie / total counts of the large-instance comparison against the best heuristics
HEADLINE_COUNTS = {"wins": 511, "ties": 88, "total": 738}

__all__ = ["GSET_TABLE", "best_known_cut", "HEADLINE_COUNTS"]
