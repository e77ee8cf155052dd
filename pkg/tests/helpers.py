"""Shared builders for the test modules."""

from __future__ import annotations

import numpy as np

from rsuloc.channel import ChannelParams, noiseless_rss
from rsuloc.dataproc import MatchedEpoch
from rsuloc.scenario import RsuNode

TRIANGLE = ((0.0, -1.0), (60.0, 15.0), (120.0, -1.0))


def make_rsus(positions) -> list[RsuNode]:
    return [RsuNode(i + 1, np.asarray(p, dtype=float)) for i, p in enumerate(positions)]


def make_epoch(positions, vehicle, params: ChannelParams | None = None, gamma=None, noise=None, t: float = 0.0):
    """Epoch with model-convention powers generated at ``vehicle``."""
    params = params or ChannelParams(sigma=0.0)
    rsus = make_rsus(positions)
    d = np.linalg.norm(np.asarray([r.position for r in rsus]) - np.asarray(vehicle, float), axis=1)
    g = params.gamma if gamma is None else gamma
    p = np.asarray(noiseless_rss(params, d, g), dtype=float)
    if noise is not None:
        p = p + np.asarray(noise, dtype=float)
    return MatchedEpoch("veh", t, tuple(zip(rsus, p.tolist())))


# Acceptance outcomes collected for the terminal summary: (id, passed, detail).
ACCEPTANCE: list[tuple[int, bool, str]] = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    """Print and remember one acceptance line, then fail the test if needed."""
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {detail}"
    print(line)
    ACCEPTANCE.append((number, bool(passed), detail))
    assert passed, line
