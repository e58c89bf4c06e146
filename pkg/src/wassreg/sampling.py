"""Seeded random streams and uniform directions on the unit sphere.

All randomness goes through PCG64 generators seeded by a
``SeedSequence([master_seed, stream_id, *extra])``. Streams are created per
task, so the result of a pairwise computation never depends on the order in
which pairs are evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_id: int = 0

    def generator(self, *extra: int) -> np.random.Generator:
        entropy = [self.master_seed & _MASK64, self.stream_id & _MASK64]
        entropy.extend(int(e) & _MASK64 for e in extra)
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def child(self, stream_id: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, stream_id)


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, SeedSpec):
        return seed.generator()
    return SeedSpec(int(seed)).generator()


def sample_directions(d: int, L: int, seed) -> np.ndarray:
    """Draw ``L`` i.i.d. directions uniform on the sphere ``S^{d-1}``.

    Standard Gaussian vectors are normalized to unit length; in one dimension
    this yields ``+1`` or ``-1`` with equal probability.

    Returns
    -------
    ndarray, shape (L, d)
    """
    if d < 1 or L < 1:
        raise ValueError(f"need d >= 1 and L >= 1, got d={d}, L={L}")
    rng = as_generator(seed)
    z = rng.standard_normal((L, d))
    norms = np.linalg.norm(z, axis=1)
    # a zero draw has probability zero; redraw defensively
    while np.any(norms == 0):
        bad = norms == 0
        z[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(z, axis=1)
    return z / norms[:, None]


def normalize(theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    nrm = np.linalg.norm(theta)
    if nrm == 0 or not np.isfinite(nrm):
        raise ValueError("cannot normalize a zero or non-finite direction")
    return theta / nrm
