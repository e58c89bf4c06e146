"""Sliced lower bounds (SW, Max-SW, EBSW) and lifted upper bounds (PW, Min-SWGG, EST).

Every estimator returns a p-power cost. :func:`evaluate_features` takes the
p-th roots and stacks the requested predictors into a :class:`FeatureVector`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError
from .measures import DiscreteMeasure
from .ot1d import _pow, project_stack, quantile_match, slice_costs
from .sampling import SeedSpec, as_generator, normalize, sample_directions

KINDS = ("SW", "EBSW", "MaxSW", "PW", "EST", "MinSWGG")
LOWER_KINDS = frozenset({"SW", "EBSW", "MaxSW"})
MONTE_CARLO_KINDS = frozenset({"SW", "EBSW", "PW", "EST"})

# initial norm of the Min-SWGG annealing perturbation
ANNEAL_SCALE = 0.5

_DEFAULTS = {
    "SW": dict(L=100, T=0),
    "EBSW": dict(L=100, T=0),
    "PW": dict(L=100, T=0),
    "EST": dict(L=100, T=0),
    "MaxSW": dict(L=10, T=50),
    "MinSWGG": dict(L=100, T=50),
}


@dataclass(frozen=True)
class PredictorConfig:
    """How to evaluate one sliced predictor.

    ``L`` is the number of Monte Carlo directions (SW, EBSW, PW, EST), restart
    candidates (Max-SW) or random-search candidates (Min-SWGG). ``T`` is the
    number of ascent / annealing steps and is ignored by the Monte Carlo kinds.
    """

    kind: str
    L: int = 100
    T: int = 0
    step_size: float = 0.1
    temperature: float = 1.0
    p: float = 2.0
    seed_stream: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown predictor kind {self.kind!r}")
        if int(self.L) < 1 or int(self.T) < 0:
            raise DataError(f"need L >= 1 and T >= 0, got L={self.L}, T={self.T}")
        if not self.temperature > 0 or not self.step_size > 0:
            raise DataError("temperature and step_size must be positive")
        if not self.p >= 1:
            raise DataError(f"order p must be >= 1, got {self.p}")
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "T", int(self.T))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "temperature", float(self.temperature))
        object.__setattr__(self, "step_size", float(self.step_size))

    @classmethod
    def default(cls, kind: str, p: float = 2.0, **overrides) -> "PredictorConfig":
        if kind not in KINDS:
            raise DataError(f"unknown predictor kind {kind!r}")
        params = dict(_DEFAULTS[kind], seed_stream=KINDS.index(kind), p=p)
        params.update({k: v for k, v in overrides.items() if v is not None})
        return cls(kind, **params)

    @property
    def is_lower(self) -> bool:
        return self.kind in LOWER_KINDS

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PredictorConfig":
        return cls(**data)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    configs: tuple = field(default=())

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Preset:
    name: str
    configs: tuple
    lower_idx: tuple
    upper_idx: tuple


PRESET_KINDS = {
    "rg-s": ("SW", "PW"),
    "rg-e": ("EBSW", "EST"),
    "rg-o": ("MaxSW", "MinSWGG"),
    "rg-se": ("SW", "EBSW", "PW", "EST"),
    "rg-seo": ("SW", "EBSW", "MaxSW", "PW", "EST", "MinSWGG"),
}


def preset(name: str, p: float = 2.0, L=None, T=None, temperature=None, step_size=None) -> Preset:
    """Predictor set of a named RG variant; lower bounds come first."""
    key = name.lower()
    if key not in PRESET_KINDS:
        raise DataError(f"unknown preset {name!r}; choose from {sorted(PRESET_KINDS)}")
    configs = []
    for kind in PRESET_KINDS[key]:
        # L and T overrides apply to the kinds that use them by default
        over_T = T if _DEFAULTS[kind]["T"] > 0 else None
        configs.append(
            PredictorConfig.default(kind, p=p, L=L, T=over_T, temperature=temperature, step_size=step_size)
        )
    lower = tuple(k for k, c in enumerate(configs) if c.is_lower)
    upper = tuple(k for k, c in enumerate(configs) if not c.is_lower)
    return Preset(key, tuple(configs), lower, upper)


def _directions(directions) -> np.ndarray:
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    if directions.shape[0] == 0 or directions.size == 0:
        raise DataError("direction list is empty")
    return directions


def _softmax_average(costs: np.ndarray, scores: np.ndarray) -> float:
    w = np.exp(scores - scores.max())
    w /= w.sum()
    return float(np.dot(w, costs))


def sw_hat(mu, nu, directions, p: float = 2.0) -> float:
    proj, _ = slice_costs(mu, nu, _directions(directions), p, lifted=False)
    return float(proj.mean())


def ebsw_hat(mu, nu, directions, p: float = 2.0, temperature: float = 1.0) -> float:
    """Importance-weighted SW with weights proportional to ``exp(cost / temperature)``."""
    if not temperature > 0:
        raise DataError("temperature must be positive")
    proj, _ = slice_costs(mu, nu, _directions(directions), p, lifted=False)
    return _softmax_average(proj, proj / temperature)


def pw_hat(mu, nu, directions, p: float = 2.0) -> float:
    _, lift = slice_costs(mu, nu, _directions(directions), p, lifted=True)
    return float(lift.mean())


def est_hat(mu, nu, directions, p: float = 2.0, temperature: float = 1.0) -> float:
    """Importance-weighted lifted cost with weights proportional to ``exp(-cost / temperature)``."""
    if not temperature > 0:
        raise DataError("temperature must be positive")
    _, lift = slice_costs(mu, nu, _directions(directions), p, lifted=True)
    return _softmax_average(lift, -lift / temperature)


def _cost_and_gradient(mu: DiscreteMeasure, nu: DiscreteMeasure, theta: np.ndarray, p: float):
    th = theta[None, :]
    xp = project_stack(mu.supports, th)
    yp = project_stack(nu.supports, th)
    src, tgt, mass, gap = quantile_match(xp, mu.weights, yp, nu.weights)
    src, tgt, gap = src[0], tgt[0], gap[0]
    mass = np.broadcast_to(mass, (1, src.shape[0]))[0]
    cost = float(np.dot(mass, _pow(np.abs(gap), p)))
    # fixed-assignment subgradient of theta -> sum m |<theta, x - y>|^p
    coef = mass * p * np.abs(gap) ** (p - 1) * np.sign(gap)
    grad = coef @ (mu.supports[src] - nu.supports[tgt])
    return cost, grad


def maxsw_ascent(mu, nu, theta0, T: int, step_size: float = 0.1, p: float = 2.0):
    """Projected (sub)gradient ascent of the projected cost on the sphere.

    The step is taken along the tangential gradient divided by ``p * cost``,
    which makes the trajectory invariant to rescaling both measures. The best
    iterate is returned, so the result never falls below the starting cost.
    """
    theta = normalize(theta0)
    best_cost, best_theta = -np.inf, theta
    for it in range(T + 1):
        cost, grad = _cost_and_gradient(mu, nu, theta, p)
        if cost > best_cost:
            best_cost, best_theta = cost, theta
        if it == T or cost <= 0:
            break
        tangent = grad - np.dot(grad, theta) * theta
        if np.linalg.norm(tangent) <= 1e-14 * max(np.linalg.norm(grad), 1e-300):
            break
        theta = normalize(theta + step_size * tangent / (p * cost))
    return best_cost, best_theta


def maxsw_hat(mu, nu, config: PredictorConfig, seed, candidates=None):
    """Max-SW estimate: best of ``L`` random starts, then ``T`` ascent steps.

    Returns
    -------
    cost : float
        Projected p-power cost at the returned direction.
    theta : ndarray, shape (d,)
    """
    if candidates is None:
        candidates = sample_directions(mu.dim, config.L, seed)
    candidates = _directions(candidates)[: config.L]
    proj, _ = slice_costs(mu, nu, candidates, config.p, lifted=False)
    k = int(np.argmax(proj))
    if config.T == 0:
        return float(proj[k]), candidates[k]
    cost, theta = maxsw_ascent(mu, nu, candidates[k], config.T, config.step_size, config.p)
    if cost < proj[k]:
        return float(proj[k]), candidates[k]
    return cost, theta


def minswgg_hat(mu, nu, config: PredictorConfig, seed, candidates=None):
    """Min-SWGG estimate: random search over ``L`` directions, then ``T`` annealing steps.

    Annealing perturbs the current direction with Gaussian noise of norm about
    ``ANNEAL_SCALE``, halved every ``T // 4`` steps, and keeps a proposal only
    if it lowers the lifted cost.
    """
    rng = as_generator(seed)
    if candidates is None:
        candidates = sample_directions(mu.dim, config.L, rng)
    candidates = _directions(candidates)[: config.L]
    _, lift = slice_costs(mu, nu, candidates, config.p, lifted=True)
    k = int(np.argmin(lift))
    best, theta = float(lift[k]), candidates[k]
    d = mu.dim
    scale = ANNEAL_SCALE
    halve_every = max(1, config.T // 4)
    for t in range(config.T):
        if best <= 0:
            break
        if t > 0 and t % halve_every == 0:
            scale /= 2
        proposal = theta + scale * rng.standard_normal(d) / np.sqrt(d)
        nrm = np.linalg.norm(proposal)
        if nrm == 0:
            continue
        proposal = proposal / nrm
        _, c = slice_costs(mu, nu, proposal[None, :], config.p, lifted=True)
        if c[0] < best:
            best, theta = float(c[0]), proposal
    return best, theta


def _as_seedspec(seed) -> SeedSpec:
    if isinstance(seed, SeedSpec):
        return seed
    return SeedSpec(int(seed), 0)


def evaluate_power_costs(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    configs: Sequence[PredictorConfig],
    seed,
    share_directions: bool = True,
) -> np.ndarray:
    """p-power estimates of each configured predictor, in config order."""
    configs = tuple(configs)
    if not configs:
        raise DataError("no predictor configs given")
    ps = {c.p for c in configs}
    if len(ps) != 1:
        raise DataError(f"inconsistent orders p across configs: {sorted(ps)}")
    p = ps.pop()
    if mu.dim != nu.dim:
        raise DataError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    spec = _as_seedspec(seed)

    shared = None
    need_lift = False
    if share_directions:
        L_max = max(c.L for c in configs)
        need_lift = any(c.kind in ("PW", "EST") for c in configs)
        shared = sample_directions(mu.dim, L_max, spec.generator(0))
        shared_proj, shared_lift = None, None
        mc = [c for c in configs if c.kind in MONTE_CARLO_KINDS]
        if mc:
            L_mc = max(c.L for c in mc)
            shared_proj, shared_lift = slice_costs(mu, nu, shared[:L_mc], p, lifted=need_lift)

    out = np.empty(len(configs))
    for k, cfg in enumerate(configs):
        if cfg.kind in MONTE_CARLO_KINDS:
            if share_directions:
                proj = shared_proj[: cfg.L]
                lift = shared_lift[: cfg.L] if shared_lift is not None else None
            else:
                dirs = sample_directions(mu.dim, cfg.L, spec.generator(1, cfg.seed_stream))
                proj, lift = slice_costs(mu, nu, dirs, p, lifted=cfg.kind in ("PW", "EST"))
            if cfg.kind == "SW":
                out[k] = proj.mean()
            elif cfg.kind == "EBSW":
                out[k] = _softmax_average(proj, proj / cfg.temperature)
            elif cfg.kind == "PW":
                out[k] = lift.mean()
            else:
                out[k] = _softmax_average(lift, -lift / cfg.temperature)
        else:
            cands = shared[: cfg.L] if share_directions else None
            rng = spec.generator(2, cfg.seed_stream)
            if cfg.kind == "MaxSW":
                out[k] = maxsw_hat(mu, nu, cfg, rng, candidates=cands)[0]
            else:
                out[k] = minswgg_hat(mu, nu, cfg, rng, candidates=cands)[0]
    return out


def evaluate_features(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    configs: Sequence[PredictorConfig],
    seed,
    share_directions: bool = True,
) -> FeatureVector:
    """Evaluate the configured predictors for one pair, as distances.

    With ``share_directions`` one direction set (of the largest ``L``) is drawn
    per pair and reused by every predictor, so the empirical bound chains hold
    exactly for that set.
    """
    configs = tuple(configs)
    costs = evaluate_power_costs(mu, nu, configs, seed, share_directions)
    p = configs[0].p
    return FeatureVector(np.maximum(costs, 0.0) ** (1.0 / p), configs)
