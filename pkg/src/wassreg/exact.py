"""Exact discrete optimal transport, used for regression labels and as an oracle."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from itertools import permutations

import numpy as np

# only numpy arrays reach the solver; skip probing GPU/autodiff backends on import
for _backend in ("PYTORCH", "JAX", "CUPY", "TENSORFLOW"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_backend}", "1")

import ot  # noqa: E402

from .errors import DataError, NumericalError
from .measures import DiscreteMeasure
from .ot1d import SparsePlan, _check_p, _pow

MAX_CELLS = 50_000_000
_NUM_ITER_MAX = 100_000_000


@dataclass(frozen=True, eq=False)
class ExactOTResult:
    cost_p: float
    plan: SparsePlan
    iterations: int | None = None

    def distance(self, p: float) -> float:
        return max(self.cost_p, 0.0) ** (1.0 / p)


def cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float) -> np.ndarray:
    """Ground cost ``C_ij = ||x_i - y_j||_p^p``."""
    if p == 2:
        return ot.dist(mu.supports, nu.supports, metric="sqeuclidean")
    diff = np.abs(mu.supports[:, None, :] - nu.supports[None, :, :])
    return _pow(diff, p).sum(axis=-1)


def exact_wasserstein(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0) -> ExactOTResult:
    """Solve the transport linear program with the network simplex of POT.

    Raises
    ------
    DataError
        Dimension mismatch or an ``n * m`` cost matrix beyond the size guard.
    NumericalError
        The solver did not reach an optimal basis.
    """
    _check_p(p)
    if mu.dim != nu.dim:
        raise DataError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    if mu.n * nu.n > MAX_CELLS:
        raise DataError(f"cost matrix {mu.n}x{nu.n} exceeds the {MAX_CELLS} cell guard")
    if mu.same_as(nu):
        idx = np.arange(mu.n)
        keep = mu.weights > 0
        return ExactOTResult(0.0, SparsePlan(idx[keep], idx[keep], mu.weights[keep].copy()), 0)

    C = cost_matrix(mu, nu, p)
    G, log = ot.emd(mu.weights, nu.weights, C, numItermax=_NUM_ITER_MAX, log=True)
    if log.get("result_code", 1) != 1:
        raise NumericalError(f"network simplex failed: {log.get('warning')}")
    src, tgt = np.nonzero(G > 0)
    mass = G[src, tgt]
    cost = float(np.dot(mass, C[src, tgt]))
    if not math.isfinite(cost):
        raise NumericalError("non-finite transport cost")
    return ExactOTResult(max(cost, 0.0), SparsePlan(src, tgt, mass), None)


def brute_force_wasserstein(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0) -> float:
    """Minimum over all permutation plans; valid for uniform measures of equal size.

    Optimal plans between two uniform ``n``-point measures include a
    permutation (extreme points of the Birkhoff polytope), so enumerating the
    ``n!`` permutations gives the exact cost. Limited to ``n <= 8``.
    """
    _check_p(p)
    if mu.n != nu.n or mu.n > 8:
        raise DataError(f"brute force needs n = m <= 8, got n={mu.n}, m={nu.n}")
    if not (mu.is_uniform and nu.is_uniform):
        raise DataError("brute force needs uniform weights")
    n = mu.n
    C = np.array(
        [[float(np.sum(np.abs(x - y) ** p)) for y in nu.supports] for x in mu.supports]
    )
    rows = np.arange(n)
    best = min(C[rows, list(perm)].sum() for perm in permutations(range(n)))
    return float(best) / n
