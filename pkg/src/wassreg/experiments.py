"""Desk-scale experiments: Gaussian mixtures, fit metrics, k-NN and distance matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import spearmanr

from ._parallel import parallel_map
from .errors import DataError
from .exact import exact_wasserstein
from .measures import DiscreteMeasure, MeasureDataset, PairIndex
from .regression import DesignMatrix, RegressionModel, design_from_measures, fit_constrained_k1, predict_pair
from .sampling import SeedSpec
from .sliced import KINDS, PRESET_KINDS, PredictorConfig, evaluate_features


@dataclass(frozen=True)
class GaussianMixtureSpec:
    d: int
    components: int = 3
    points_per_component: int = 200
    mean_scale: float = 5.0
    cov_scale: float = 1.0
    seed: SeedSpec = SeedSpec(0, 0)

    def __post_init__(self):
        if self.d < 1 or self.components < 1 or self.points_per_component < 1:
            raise DataError("d, components and points_per_component must be >= 1")
        if self.mean_scale < 0 or self.cov_scale < 0:
            raise DataError("mean_scale and cov_scale must be nonnegative")

    def with_seed(self, seed: SeedSpec, d: int | None = None) -> "GaussianMixtureSpec":
        return GaussianMixtureSpec(
            self.d if d is None else d,
            self.components,
            self.points_per_component,
            self.mean_scale,
            self.cov_scale,
            seed,
        )


def sample_gaussian_mixture(spec: GaussianMixtureSpec) -> DiscreteMeasure:
    """Uniform empirical measure of an isotropic Gaussian mixture.

    Component means are uniform in ``[-mean_scale, mean_scale]^d``; each
    component contributes ``points_per_component`` draws with covariance
    ``cov_scale**2 * I``.
    """
    rng = spec.seed.generator()
    means = rng.uniform(-spec.mean_scale, spec.mean_scale, size=(spec.components, spec.d))
    noise = rng.standard_normal((spec.components * spec.points_per_component, spec.d))
    pts = np.repeat(means, spec.points_per_component, axis=0) + spec.cov_scale * noise
    return DiscreteMeasure(pts)


@dataclass(frozen=True)
class MetricReport:
    r2: float
    mse: float
    mae: float
    n_pairs: int
    r2_defined: bool = True
    seed: int | None = None
    config_digest: str | None = None

    def as_row(self) -> dict:
        return {
            "r2": self.r2 if self.r2_defined else "nan",
            "mse": self.mse,
            "mae": self.mae,
            "n_pairs": self.n_pairs,
        }


def metrics(predicted, actual, seed=None, config_digest=None) -> MetricReport:
    """R^2, mean squared and mean absolute error of predictions against labels.

    A constant ``actual`` leaves R^2 undefined; it is then reported as NaN
    with ``r2_defined=False``.
    """
    pred = np.asarray(predicted, dtype=float).reshape(-1)
    act = np.asarray(actual, dtype=float).reshape(-1)
    if pred.shape != act.shape:
        raise DataError(f"length mismatch: {pred.shape[0]} predictions, {act.shape[0]} labels")
    if act.shape[0] < 2:
        raise DataError("need at least two pairs")
    resid = act - pred
    mse = float(np.mean(resid**2))
    mae = float(np.mean(np.abs(resid)))
    ss_tot = float(np.sum((act - act.mean()) ** 2))
    if ss_tot == 0:
        return MetricReport(math.nan, mse, mae, act.shape[0], False, seed, config_digest)
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot
    return MetricReport(r2, mse, mae, act.shape[0], True, seed, config_digest)


def _label_key(v):
    return (str(type(v)), v)


def knn_classify(distances, train_labels: Sequence, k: int) -> list:
    """Majority vote among the ``k`` nearest training items of each test row.

    Neighbours are ranked by distance, ties by training index. Tied votes go
    to the class with the smaller summed distance over its neighbours, then
    to the smaller class label.
    """
    D = np.atleast_2d(np.asarray(distances, dtype=float))
    if k <= 0:
        raise DataError(f"k must be positive, got {k}")
    if D.shape[1] != len(train_labels):
        raise DataError(f"{D.shape[1]} train columns but {len(train_labels)} labels")
    if k > D.shape[1]:
        raise DataError(f"k={k} exceeds the {D.shape[1]} training items")
    labels = list(train_labels)
    out = []
    for row in D:
        nearest = np.argsort(row, kind="stable")[:k]
        votes: dict = {}
        for t in nearest:
            cnt, tot = votes.get(labels[t], (0, 0.0))
            votes[labels[t]] = (cnt + 1, tot + row[t])
        best = min(votes, key=lambda c: (-votes[c][0], votes[c][1], _label_key(c)))
        out.append(best)
    return out


def knn_accuracy(distances, train_labels, test_labels, ks=(1, 3, 5, 10, 15)) -> dict:
    acc = {}
    for k in ks:
        if k > len(train_labels):
            continue
        pred = knn_classify(distances, train_labels, k)
        acc[k] = float(np.mean([a == b for a, b in zip(pred, test_labels)]))
    return acc


def _cell_value(mu, nu, scorer, seed: int, key: int, p: float) -> float:
    if isinstance(scorer, str):
        if scorer != "exact":
            raise DataError(f"unknown scorer {scorer!r}")
        return exact_wasserstein(mu, nu, p).distance(p)
    if isinstance(scorer, RegressionModel):
        return predict_pair(scorer, mu, nu, key)
    if isinstance(scorer, PredictorConfig):
        return float(evaluate_features(mu, nu, (scorer,), SeedSpec(seed, key)).values[0])
    raise DataError(f"unsupported scorer {scorer!r}")


def pairwise_matrix(
    dataset_a: MeasureDataset,
    dataset_b: MeasureDataset | None = None,
    scorer="exact",
    seed: int = 0,
    p: float = 2.0,
    threads: int = 1,
) -> np.ndarray:
    """Distances between every measure of ``dataset_a`` and of ``dataset_b``.

    ``scorer`` is ``"exact"``, a fitted :class:`RegressionModel` or a single
    :class:`PredictorConfig`. Cell ``(i, j)`` draws its randomness from the
    stream ``PairIndex(i, j).key``. Without ``dataset_b`` the matrix is
    computed on the upper triangle and mirrored, with a zero diagonal.
    """
    if isinstance(scorer, PredictorConfig):
        p = scorer.p
    elif isinstance(scorer, RegressionModel):
        p = scorer.p
    same = dataset_b is None or dataset_b is dataset_a
    b = dataset_a if same else dataset_b
    if dataset_a.dim != b.dim:
        raise DataError(f"dimension mismatch: {dataset_a.dim} vs {b.dim}")
    na, nb = len(dataset_a), len(b)
    if same:
        cells = [(i, j) for i in range(na) for j in range(i + 1, na)]
    else:
        cells = [(i, j) for i in range(na) for j in range(nb)]

    def task(ij):
        i, j = ij
        return _cell_value(dataset_a[i], b[j], scorer, seed, PairIndex(i, j).key, p)

    values = parallel_map(task, cells, threads)
    out = np.zeros((na, nb))
    for (i, j), v in zip(cells, values):
        out[i, j] = v
        if same:
            out[j, i] = v
    return out


# ---------------------------------------------------------------- dimension sweep


@dataclass(frozen=True)
class SweepRow:
    variant: str
    d: int
    omega: float
    r2: float
    mse: float
    mae: float
    degenerate: bool
    seed: int


def _variant_kinds(variants: Sequence[str]) -> tuple:
    needed = set()
    for v in variants:
        key = v.lower()
        if key not in ("rg-s", "rg-e", "rg-o"):
            raise DataError(f"sweep variants must pair one lower and one upper bound, got {v!r}")
        needed.update(PRESET_KINDS[key])
    return tuple(k for k in KINDS if k in needed)


def mixture_pairs(spec: GaussianMixtureSpec, n_pairs: int, seed: int, d: int, offset: int = 0):
    """Independent mixture pairs; measure ``k`` uses stream ``(d << 32) | k``."""
    out = []
    for r in range(offset, offset + n_pairs):
        mu = sample_gaussian_mixture(spec.with_seed(SeedSpec(seed, (d << 32) | (2 * r)), d))
        nu = sample_gaussian_mixture(spec.with_seed(SeedSpec(seed, (d << 32) | (2 * r + 1)), d))
        out.append((mu, nu))
    return out


def sweep_design(
    d: int,
    template: GaussianMixtureSpec,
    kinds: Sequence[str],
    n_pairs: int,
    seed: int,
    threads: int = 1,
    **config_overrides,
) -> DesignMatrix:
    configs = tuple(PredictorConfig.default(k, **config_overrides) for k in kinds)
    pairs = mixture_pairs(template, n_pairs, seed, d)
    return design_from_measures(
        pairs, configs, seed, stream_ids=[(d << 32) | r for r in range(n_pairs)], threads=threads
    )


def dimension_sweep(
    d_list: Sequence[int],
    template: GaussianMixtureSpec,
    variants: Sequence[str] = ("rg-s",),
    fit_pairs: int = 60,
    eval_pairs: int = 60,
    seed: int = 0,
    threads: int = 1,
    **config_overrides,
) -> list[SweepRow]:
    """Fit the constrained one-pair model in each dimension and score it on held-out pairs.

    Fitting and evaluation pairs are drawn independently, so they never share
    a measure. Each predictor is evaluated once per pair and reused by every
    variant that needs it.
    """
    if fit_pairs < 1 or eval_pairs < 2:
        raise DataError("need at least one fitting pair and two evaluation pairs")
    kinds = _variant_kinds(variants)
    rows = []
    for d in d_list:
        design = sweep_design(d, template, kinds, fit_pairs + eval_pairs, seed, threads, **config_overrides)
        train = DesignMatrix(design.S[:fit_pairs], design.W[:fit_pairs])
        S_eval, W_eval = design.S[fit_pairs:], design.W[fit_pairs:]
        for v in variants:
            lo_kind, up_kind = PRESET_KINDS[v.lower()]
            lo, up = kinds.index(lo_kind), kinds.index(up_kind)
            model = fit_constrained_k1(train, lo, up)
            w = float(model.weights[0])
            pred = w * S_eval[:, lo] + (1 - w) * S_eval[:, up]
            rep = metrics(pred, W_eval)
            rows.append(
                SweepRow(v.lower(), int(d), w, rep.r2, rep.mse, rep.mae, bool(model.fit_report["degenerate"]), seed)
            )
    return rows


def rank_correlation(x, y) -> float:
    return float(spearmanr(x, y).statistic)


# ---------------------------------------------------------------- synthetic classes


def template_class_dataset(
    n_classes: int,
    clouds_per_class: int,
    d: int = 3,
    components: int = 3,
    points_per_component: int = 50,
    mean_scale: float = 1.0,
    mean_jitter: float = 0.3,
    cov_scale: float = 0.3,
    seed: int = 0,
    stream: int = 0,
    templates: np.ndarray | None = None,
) -> tuple[MeasureDataset, np.ndarray]:
    """Point clouds whose class is a fixed mixture template.

    Each class owns ``components`` template means; a cloud of that class
    perturbs every mean by ``N(0, mean_jitter^2 I)`` and samples
    ``points_per_component`` points around it. Returns the dataset (labelled
    ``0 .. n_classes - 1``) and the templates so that a test split can reuse them.
    """
    if templates is None:
        trng = SeedSpec(seed, 0).generator(1)
        templates = trng.uniform(-mean_scale, mean_scale, size=(n_classes, components, d))
    measures, labels = [], []
    for c in range(n_classes):
        for k in range(clouds_per_class):
            rng = SeedSpec(seed, stream).generator(c, k)
            means = templates[c] + mean_jitter * rng.standard_normal(templates[c].shape)
            pts = np.repeat(means, points_per_component, axis=0)
            pts = pts + cov_scale * rng.standard_normal(pts.shape)
            measures.append(DiscreteMeasure(pts))
            labels.append(c)
    return MeasureDataset(tuple(measures), tuple(labels)), templates
