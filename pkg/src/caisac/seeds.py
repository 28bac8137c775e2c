"""Deterministic child-seed derivation for Monte Carlo stages.

Every random draw in a sweep flows through ``child_seed(master, stage, *path)``
where ``stage`` is one of the constants below and ``path`` identifies the trial,
band, or draw index. The tuple feeds a ``numpy.random.SeedSequence`` whose
output is stable across processes, so trial order and worker count never change
the numbers.
"""

from __future__ import annotations

import numpy as np

STAGE_SENSING_FRAME = 1
STAGE_ECHO = 2
STAGE_COMM_FRAME = 3
STAGE_COMM_CHANNEL = 4
STAGE_COMM_NOISE = 5


def child_seed(master_seed: int, stage: int, *path: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=(int(master_seed), int(stage), *map(int, path)))
