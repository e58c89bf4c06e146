"""Optimal transport along a line and the plans it lifts to ``R^d``.

Costs are returned in p-power form (``W_p^p``). Everything is vectorized over
a stack of directions; the single-direction functions are thin views on the
same kernel, so a one-direction batch reproduces them bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import DiscreteMeasure

# budget for (directions x plan entries) temporaries
_CHUNK_ELEMS = 4_000_000


@dataclass(frozen=True, eq=False)
class ProjectedMeasure:
    positions: np.ndarray
    weights: np.ndarray
    sort_permutation: np.ndarray

    @property
    def n(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True, eq=False)
class SparsePlan:
    """Coupling stored as parallel arrays of (source, target, mass)."""

    src: np.ndarray
    tgt: np.ndarray
    mass: np.ndarray

    @property
    def entries(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(w)) for i, j, w in zip(self.src, self.tgt, self.mass)]

    def __len__(self) -> int:
        return self.mass.shape[0]

    def row_sums(self, n: int) -> np.ndarray:
        return np.bincount(self.src, weights=self.mass, minlength=n)

    def col_sums(self, m: int) -> np.ndarray:
        return np.bincount(self.tgt, weights=self.mass, minlength=m)

    def cost(self, mu: DiscreteMeasure, nu: DiscreteMeasure, p: float) -> float:
        diff = mu.supports[self.src] - nu.supports[self.tgt]
        return float(np.dot(self.mass, _pow(np.abs(diff), p).sum(axis=1)))

    def dense(self, n: int, m: int) -> np.ndarray:
        out = np.zeros((n, m))
        np.add.at(out, (self.src, self.tgt), self.mass)
        return out


def _check_p(p: float) -> None:
    if not p >= 1:
        raise ValueError(f"order p must be >= 1, got {p}")


def _pow(v: np.ndarray, p: float) -> np.ndarray:
    if p == 2:
        return v * v
    if p == 1:
        return v
    return v**p


def project_stack(supports: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """Projections ``<theta_l, x_i>`` as an (L, n) array.

    Accumulated coordinate by coordinate rather than through a matmul, so each
    entry is bitwise independent of how many directions are stacked.
    """
    out = thetas[:, 0:1] * supports[:, 0]
    for k in range(1, supports.shape[1]):
        out += thetas[:, k : k + 1] * supports[:, k]
    return out


def _take_rows(v: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """``v[r, idx[r, k]]`` for every row ``r`` (row counts of ``v`` and ``idx`` match)."""
    offsets = (np.arange(v.shape[0]) * v.shape[1])[:, None]
    return np.take(v, idx + offsets)


def argsort_rows(v: np.ndarray):
    """Row-wise ascending order (ties broken by original index) and sorted values."""
    order = np.argsort(v, axis=1)
    srt = _take_rows(v, order)
    tied = np.any(srt[:, 1:] == srt[:, :-1], axis=1)
    if np.any(tied):
        order[tied] = np.argsort(v[tied], axis=1, kind="stable")
        srt[tied] = _take_rows(v[tied], order[tied])
    return order, srt


def lifted_pair_costs(X: np.ndarray, Y: np.ndarray, src: np.ndarray, tgt: np.ndarray, p: float) -> np.ndarray:
    """``||X[src] - Y[tgt]||_p^p`` elementwise, summed coordinate by coordinate."""
    out = np.zeros(src.shape)
    diff = np.empty(src.shape)
    for k in range(X.shape[1]):
        np.subtract(np.take(X[:, k], src), np.take(Y[:, k], tgt), out=diff)
        out += _pow(np.abs(diff), p)
    return out


def _uniform_match(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and bool(np.all(a == a[0])) and bool(np.all(b == a[0]))


def quantile_match(xp, a, yp, b, ix=None, iy=None):
    """North-west-corner matching of sorted weight profiles, row by row.

    Parameters
    ----------
    xp, yp : ndarray, shape (L, n) and (L, m)
        Projected positions of the two measures for each direction.
    a, b : ndarray, shape (n,) and (m,)
        Weights.
    ix, iy : ndarray, optional
        Precomputed ascending orderings of ``xp`` / ``yp`` (ties by index).

    Returns
    -------
    src, tgt : int ndarrays, shape (L, K)
        Original indices of matched atoms, ordered by quantile level.
    mass : ndarray, shape (L, K) or (1, K)
        Mass carried by each match (zero-mass filler entries may occur).
    gap : ndarray, shape (L, K)
        Projected displacement ``xp[src] - yp[tgt]`` of each match.
    """
    n = xp.shape[1]
    m = yp.shape[1]
    if ix is None:
        ix, xs = argsort_rows(xp)
    else:
        xs = _take_rows(xp, ix)
    if iy is None:
        iy, ys = argsort_rows(yp)
    else:
        ys = _take_rows(yp, iy)
    if _uniform_match(a, b):
        return ix, iy, np.full((1, n), a[0]), xs - ys
    ca = np.minimum(np.cumsum(a[ix], axis=1), 1.0)
    cb = np.minimum(np.cumsum(b[iy], axis=1), 1.0)
    ca[:, -1] = 1.0
    cb[:, -1] = 1.0
    z = np.concatenate([ca, cb], axis=1)
    order = np.argsort(z, axis=1, kind="stable")
    t = _take_rows(z, order)
    from_a = order < n
    # number of a- (resp. b-) breakpoints strictly before each merged level
    ka = np.cumsum(from_a, axis=1) - from_a
    kb = np.cumsum(~from_a, axis=1) - ~from_a
    np.minimum(ka, n - 1, out=ka)
    np.minimum(kb, m - 1, out=kb)
    mass = np.diff(t, axis=1, prepend=0.0)
    src = _take_rows(ix, ka)
    tgt = _take_rows(iy, kb)
    gap = _take_rows(xs, ka) - _take_rows(ys, kb)
    return src, tgt, mass, gap


def slice_costs(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    thetas: np.ndarray,
    p: float = 2.0,
    lifted: bool = True,
):
    """Projected and (optionally) lifted p-power costs for each direction.

    Returns
    -------
    projected : ndarray, shape (L,)
    lifted : ndarray, shape (L,) or None
    """
    _check_p(p)
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if thetas.shape[1] != mu.dim or mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: theta {thetas.shape[1]}, mu {mu.dim}, nu {nu.dim}")
    L = thetas.shape[0]
    K = mu.n + nu.n
    step = max(1, _CHUNK_ELEMS // K)
    proj = np.empty(L)
    lift = np.empty(L) if lifted else None
    for s in range(0, L, step):
        th = thetas[s : s + step]
        xp = project_stack(mu.supports, th)
        yp = project_stack(nu.supports, th)
        src, tgt, mass, gap = quantile_match(xp, mu.weights, yp, nu.weights)
        proj[s : s + step] = (mass * _pow(np.abs(gap), p)).sum(axis=1)
        if lifted:
            pair_costs = lifted_pair_costs(mu.supports, nu.supports, src, tgt, p)
            lift[s : s + step] = (mass * pair_costs).sum(axis=1)
    return proj, lift


def project(measure: DiscreteMeasure, theta) -> ProjectedMeasure:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != measure.dim:
        raise ValueError(f"theta has dimension {theta.shape[0]}, measure has {measure.dim}")
    pos = project_stack(measure.supports, theta[None, :])[0]
    perm = argsort_rows(pos[None, :])[0][0]
    return ProjectedMeasure(pos, measure.weights, perm)


def _match_projected(mu: ProjectedMeasure, nu: ProjectedMeasure):
    return quantile_match(
        mu.positions[None, :],
        mu.weights,
        nu.positions[None, :],
        nu.weights,
        ix=mu.sort_permutation[None, :],
        iy=nu.sort_permutation[None, :],
    )


def w1d_cost(mu: ProjectedMeasure, nu: ProjectedMeasure, p: float = 2.0) -> float:
    """``W_p^p`` between two measures on the line."""
    _check_p(p)
    _, _, mass, gap = _match_projected(mu, nu)
    return float((mass * _pow(np.abs(gap), p)).sum(axis=1)[0])


def w1d_plan(mu: ProjectedMeasure, nu: ProjectedMeasure) -> SparsePlan:
    """Monotone optimal plan on the line, zero-mass entries dropped."""
    src, tgt, mass, _ = _match_projected(mu, nu)
    src, tgt = src[0], tgt[0]
    mass = np.broadcast_to(mass, src[None, :].shape)[0]
    keep = mass > 0
    return SparsePlan(src[keep].copy(), tgt[keep].copy(), mass[keep].copy())


def lifted_cost(mu: DiscreteMeasure, nu: DiscreteMeasure, theta, p: float = 2.0) -> float:
    """Cost in ``R^d`` of the plan induced by the optimal 1-D plan along ``theta``."""
    theta = np.asarray(theta, dtype=float).reshape(1, -1)
    return float(slice_costs(mu, nu, theta, p, lifted=True)[1][0])
