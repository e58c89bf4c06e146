"""Linear regression of exact Wasserstein distances on sliced predictors.

Two model families, both without intercept:

* unconstrained: ``W ~ sum_k w_k S_k`` fit by least squares;
* constrained midpoint: ``W ~ mean_k (w_k SL_k + (1 - w_k) SU_k)`` with
  ``0 <= w_k <= 1``, pairing each lower bound ``SL_k`` with an upper bound
  ``SU_k``. For a single pair this is the usual ``w SL + (1 - w) SU``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ._parallel import parallel_map
from .errors import ConfigMismatchError, DataError, ModelFormatError, ModelVersionError
from .exact import exact_wasserstein
from .measures import DiscreteMeasure, MeasureDataset, PairIndex
from .sampling import SeedSpec
from .sliced import FeatureVector, PredictorConfig, evaluate_features

MODEL_FORMAT = "wassreg-model"
MODEL_VERSION = 1


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    S: np.ndarray
    W: np.ndarray
    pair_ids: tuple = ()

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.S, dtype=float))
        W = np.asarray(self.W, dtype=float).reshape(-1)
        if S.shape[0] == 0 or S.shape[1] == 0:
            raise DataError("empty design matrix")
        if S.shape[0] != W.shape[0]:
            raise DataError(f"{S.shape[0]} feature rows but {W.shape[0]} labels")
        if not (np.all(np.isfinite(S)) and np.all(np.isfinite(W))):
            raise DataError("design matrix contains NaN or Inf")
        if np.any(W < 0):
            raise DataError("negative Wasserstein label")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "pair_ids", tuple(self.pair_ids))

    @property
    def M(self) -> int:
        return self.S.shape[0]

    @property
    def K(self) -> int:
        return self.S.shape[1]

    def scaled(self, c: float) -> "DesignMatrix":
        return DesignMatrix(self.S * c, self.W * c, self.pair_ids)


@dataclass(frozen=True, eq=False)
class RegressionModel:
    weights: np.ndarray
    configs: tuple
    constrained: bool
    lower_idx: tuple = ()
    upper_idx: tuple = ()
    p: float = 2.0
    seed: int = 0
    M: int = 0
    share_directions: bool = True
    preset: str | None = None
    fit_report: dict = field(default_factory=dict)
    train_pairs: tuple = ()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "configs", tuple(self.configs))
        object.__setattr__(self, "lower_idx", tuple(int(i) for i in self.lower_idx))
        object.__setattr__(self, "upper_idx", tuple(int(i) for i in self.upper_idx))
        if self.constrained:
            if len(self.lower_idx) != len(self.upper_idx) or len(self.lower_idx) != w.shape[0]:
                raise DataError("constrained model needs one weight per (lower, upper) pair")
            if np.any(w < 0) or np.any(w > 1):
                raise DataError("constrained weights must lie in [0, 1]")

    def with_report(self, **entries) -> "RegressionModel":
        report = dict(self.fit_report)
        report.update(entries)
        return RegressionModel(
            self.weights, self.configs, self.constrained, self.lower_idx, self.upper_idx,
            self.p, self.seed, self.M, self.share_directions, self.preset, report, self.train_pairs,
        )


# ---------------------------------------------------------------- design


def _pair_row(mu, nu, configs, seed_spec, share, labeler, p):
    fv = evaluate_features(mu, nu, configs, seed_spec, share)
    label = labeler(mu, nu, p).distance(p) if labeler is not None else math.nan
    return fv.values, label


def design_from_measures(
    measure_pairs: Sequence[tuple[DiscreteMeasure, DiscreteMeasure]],
    configs: Sequence[PredictorConfig],
    seed: int,
    stream_ids: Sequence[int] | None = None,
    labeler: Callable = exact_wasserstein,
    share_directions: bool = True,
    threads: int = 1,
    labels: Sequence[float] | None = None,
    pair_ids: Sequence = (),
) -> DesignMatrix:
    """Feature rows and exact labels for explicit ``(mu, nu)`` pairs.

    Row ``r`` uses the seed stream ``stream_ids[r]`` (default ``r``), so rows
    can be computed in any order or in parallel with identical results.
    """
    configs = tuple(configs)
    if not measure_pairs:
        raise DataError("no pairs given")
    p = configs[0].p
    if stream_ids is None:
        stream_ids = range(len(measure_pairs))
    use_labeler = None if labels is not None else labeler

    def task(args):
        (mu, nu), sid = args
        return _pair_row(mu, nu, configs, SeedSpec(seed, sid), share_directions, use_labeler, p)

    rows = parallel_map(task, list(zip(measure_pairs, stream_ids)), threads)
    S = np.array([r[0] for r in rows])
    W = np.asarray(labels, dtype=float) if labels is not None else np.array([r[1] for r in rows])
    return DesignMatrix(S, W, tuple(pair_ids))


def build_design(
    dataset: MeasureDataset,
    pairs: Sequence[PairIndex],
    configs: Sequence[PredictorConfig],
    seed: int,
    labeler: Callable = exact_wasserstein,
    share_directions: bool = True,
    threads: int = 1,
    labels: dict | None = None,
) -> DesignMatrix:
    """Design matrix for indexed pairs of a dataset.

    ``labels`` may map ``(i, j)`` to precomputed exact distances; otherwise
    ``labeler`` is called for every pair.
    """
    pairs = list(pairs)
    if not pairs:
        raise DataError("no pairs given")
    dataset.check_pairs(pairs)
    label_list = None
    if labels is not None:
        try:
            label_list = [labels[(q.i, q.j)] for q in pairs]
        except KeyError as exc:
            raise DataError(f"no precomputed label for pair {exc.args[0]}") from None
    return design_from_measures(
        [(dataset[q.i], dataset[q.j]) for q in pairs],
        configs,
        seed,
        stream_ids=[q.key for q in pairs],
        labeler=labeler,
        share_directions=share_directions,
        threads=threads,
        labels=label_list,
        pair_ids=pairs,
    )


# ---------------------------------------------------------------- fitting


def _training_report(pred: np.ndarray, W: np.ndarray) -> dict:
    resid = W - pred
    ss_res = float(np.dot(resid, resid))
    ss_tot = float(np.sum((W - W.mean()) ** 2))
    return {
        "rmse": math.sqrt(ss_res / W.shape[0]),
        "r2": 1.0 - ss_res / ss_tot if ss_tot > 0 else None,
        "residual_mean": float(resid.mean()),
        "residual_std": float(resid.std()),
        "M": int(W.shape[0]),
    }


def fit_unconstrained(design: DesignMatrix, configs: Sequence[PredictorConfig] = (), **meta) -> RegressionModel:
    """Least-squares weights ``argmin ||S w - W||^2`` via an SVD solve.

    Rank-deficient designs get the minimum-norm solution and a
    ``rank_deficient`` flag in the fit report.
    """
    S, W = design.S, design.W
    if design.M < design.K:
        warnings.warn(f"fitting {design.K} weights from only {design.M} pairs", stacklevel=2)
    w, _, rank, _ = np.linalg.lstsq(S, W, rcond=None)
    report = _training_report(S @ w, W)
    report.update(rank=int(rank), rank_deficient=bool(rank < design.K))
    return _model(w, configs, False, (), (), design, report, meta)


def fit_constrained_k1(
    design: DesignMatrix, lower: int = 0, upper: int = 1, configs: Sequence[PredictorConfig] = (), **meta
) -> RegressionModel:
    """Closed-form constrained fit for one (lower, upper) pair.

    The unconstrained minimizer of ``||(W - SU) - w (SL - SU)||^2`` is
    clamped to ``[0, 1]``, which is the constrained minimizer since the
    objective is a convex parabola in ``w``. When ``SL == SU`` on every row
    the weight is unidentifiable: ``w = 0.5`` with a ``degenerate`` flag.
    """
    SL, SU, W = design.S[:, lower], design.S[:, upper], design.W
    gap = SU - SL
    den = float(np.dot(gap, gap))
    scale = float(np.dot(SU, SU)) + float(np.dot(SL, SL))
    degenerate = den <= 1e-24 * scale or den == 0.0
    if degenerate:
        w = 0.5
        raw = math.nan
    else:
        raw = float(np.dot(gap, SU - W)) / den
        w = min(max(raw, 0.0), 1.0)
    pred = w * SL + (1 - w) * SU
    report = _training_report(pred, W)
    report.update(degenerate=degenerate, closed_form=None if degenerate else raw)
    return _model(np.array([w]), configs, True, (lower,), (upper,), design, report, meta)


def _box_qp(A: np.ndarray, b: np.ndarray, max_iter: int = 10_000, tol: float = 1e-12):
    """Projected gradient descent for ``min ||A w - b||^2`` over ``[0, 1]^K``.

    Step ``1 / Lip`` with ``Lip = 2 * lambda_max(A^T A)`` guarantees monotone
    descent. Stops when the loss drops by less than ``tol`` times the initial
    loss, then polishes the result with an exact solve on its active set.
    Returns the weights and the loss after every iteration.
    """
    K = A.shape[1]
    H = A.T @ A
    lip = 2.0 * float(np.linalg.eigvalsh(H)[-1])
    w = np.full(K, 0.5)
    r = A @ w - b
    loss = float(r @ r)
    history = [loss]
    if lip <= 0:
        return w, history
    ref = max(loss, np.finfo(float).tiny)
    for _ in range(max_iter):
        w_new = np.clip(w - (2.0 * (A.T @ r)) / lip, 0.0, 1.0)
        r_new = A @ w_new - b
        new = float(r_new @ r_new)
        if new > loss:
            # rounding at the optimum; keep the better point
            break
        improvement = loss - new
        w, r, loss = w_new, r_new, new
        history.append(loss)
        if improvement < tol * ref:
            break
    polished = _polish(A, b, w)
    if polished is not None:
        r = A @ polished - b
        if float(r @ r) <= loss:
            w = polished
            history.append(float(r @ r))
    return w, history


def _polish(A: np.ndarray, b: np.ndarray, w: np.ndarray, bound_tol: float = 1e-10):
    """Exact solve on the active set guessed from an approximate box-QP solution.

    Coordinates sitting on a bound with the gradient pushing outward stay
    fixed; the rest are solved by least squares. Returns None when that
    solution leaves the box.
    """
    grad = A.T @ (A @ w - b)
    fixed_lo = (w <= bound_tol) & (grad >= 0)
    fixed_hi = (w >= 1 - bound_tol) & (grad <= 0)
    free = ~(fixed_lo | fixed_hi)
    out = np.where(fixed_hi, 1.0, 0.0)
    if np.any(free):
        rhs = b - A[:, ~free] @ out[~free]
        sol = np.linalg.lstsq(A[:, free], rhs, rcond=None)[0]
        if np.any(sol < 0) or np.any(sol > 1):
            return None
        out[free] = sol
    return out


def constrained_system(S: np.ndarray, W: np.ndarray, lower_idx, upper_idx):
    """Rewrite the midpoint model as ``A w ~ b``."""
    SL = S[:, list(lower_idx)]
    SU = S[:, list(upper_idx)]
    K = SL.shape[1]
    return (SL - SU) / K, W - SU.mean(axis=1)


def fit_constrained_general(
    design: DesignMatrix,
    lower_idx: Sequence[int],
    upper_idx: Sequence[int],
    configs: Sequence[PredictorConfig] = (),
    max_iter: int = 10_000,
    **meta,
) -> RegressionModel:
    """Box-constrained least squares for any number of (lower, upper) pairs."""
    lower_idx, upper_idx = tuple(lower_idx), tuple(upper_idx)
    if len(lower_idx) != len(upper_idx) or not lower_idx:
        raise DataError(f"mismatched pairing: {len(lower_idx)} lower vs {len(upper_idx)} upper")
    A, b = constrained_system(design.S, design.W, lower_idx, upper_idx)
    w, history = _box_qp(A, b, max_iter=max_iter)
    degenerate = bool(np.all(A == 0))
    pred = design.S[:, list(upper_idx)].mean(axis=1) + A @ w
    report = _training_report(pred, design.W)
    report.update(n_iter=len(history) - 1, loss=history[-1], degenerate=degenerate)
    return _model(w, configs, True, lower_idx, upper_idx, design, report, meta)


def fit(
    design: DesignMatrix,
    configs: Sequence[PredictorConfig],
    constrained: bool,
    lower_idx: Sequence[int] = (),
    upper_idx: Sequence[int] = (),
    **meta,
) -> RegressionModel:
    if not constrained:
        return fit_unconstrained(design, configs, **meta)
    if len(lower_idx) == 1 and len(upper_idx) == 1:
        return fit_constrained_k1(design, lower_idx[0], upper_idx[0], configs, **meta)
    return fit_constrained_general(design, lower_idx, upper_idx, configs, **meta)


def _model(w, configs, constrained, lower, upper, design, report, meta) -> RegressionModel:
    configs = tuple(configs)
    p = configs[0].p if configs else meta.pop("p", 2.0)
    meta.pop("p", None)
    train_pairs = meta.pop("train_pairs", None)
    if train_pairs is None:
        train_pairs = tuple(
            (q.i, q.j) for q in design.pair_ids if isinstance(q, PairIndex)
        )
    return RegressionModel(
        weights=np.asarray(w, dtype=float),
        configs=configs,
        constrained=constrained,
        lower_idx=lower,
        upper_idx=upper,
        p=p,
        M=design.M,
        fit_report=report,
        train_pairs=tuple(train_pairs),
        **meta,
    )


# ---------------------------------------------------------------- prediction


def predict_array(model: RegressionModel, S: np.ndarray) -> np.ndarray:
    """Predictions for a stack of feature rows (distances, clamped at 0)."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if model.constrained:
        SL = S[:, list(model.lower_idx)]
        SU = S[:, list(model.upper_idx)]
        pred = (SL * model.weights + SU * (1.0 - model.weights)).mean(axis=1)
    else:
        if S.shape[1] != model.weights.shape[0]:
            raise ConfigMismatchError(f"{S.shape[1]} features for {model.weights.shape[0]} weights")
        pred = S @ model.weights
    return np.maximum(pred, 0.0)


def predict(model: RegressionModel, features: FeatureVector) -> float:
    if features.configs and model.configs and tuple(features.configs) != tuple(model.configs):
        raise ConfigMismatchError("features were evaluated with different predictor configs than the model")
    return float(predict_array(model, features.values[None, :])[0])


def predict_pair(model: RegressionModel, mu: DiscreteMeasure, nu: DiscreteMeasure, stream_id: int = 0) -> float:
    fv = evaluate_features(mu, nu, model.configs, SeedSpec(model.seed, stream_id), model.share_directions)
    return predict(model, fv)


# ---------------------------------------------------------------- model file


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.floating,)):
        return _jsonable(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def model_to_dict(model: RegressionModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "preset": model.preset,
        "p": model.p,
        "constrained": model.constrained,
        "share_directions": model.share_directions,
        "configs": [c.to_dict() for c in model.configs],
        "weights": [float(w) for w in model.weights],
        "lower_idx": list(model.lower_idx),
        "upper_idx": list(model.upper_idx),
        "seed": model.seed,
        "M": model.M,
        "fit_report": _jsonable(model.fit_report),
        "train_pairs": [list(t) for t in model.train_pairs],
    }


def model_from_dict(doc: dict) -> RegressionModel:
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a wassreg model document")
    if doc.get("version") != MODEL_VERSION:
        raise ModelVersionError(f"unsupported model version {doc.get('version')!r}")
    try:
        configs = []
        for c in doc["configs"]:
            try:
                configs.append(PredictorConfig.from_dict(c))
            except DataError as exc:
                raise ModelVersionError(str(exc)) from None
            except TypeError as exc:
                raise ModelFormatError(f"bad predictor config: {exc}") from None
        return RegressionModel(
            weights=np.array(doc["weights"], dtype=float),
            configs=tuple(configs),
            constrained=bool(doc["constrained"]),
            lower_idx=tuple(doc["lower_idx"]),
            upper_idx=tuple(doc["upper_idx"]),
            p=float(doc["p"]),
            seed=int(doc["seed"]),
            M=int(doc["M"]),
            share_directions=bool(doc.get("share_directions", True)),
            preset=doc.get("preset"),
            fit_report=dict(doc.get("fit_report") or {}),
            train_pairs=tuple(tuple(t) for t in doc.get("train_pairs", [])),
        )
    except KeyError as exc:
        raise ModelFormatError(f"model file lacks field {exc.args[0]!r}") from None
    except ModelFormatError:
        raise
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from None


def save_model(model: RegressionModel, path: str | Path) -> None:
    text = json.dumps(model_to_dict(model), indent=2, allow_nan=False)
    Path(path).write_text(text + "\n")


def load_model(path: str | Path) -> RegressionModel:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing model file: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None
    return model_from_dict(doc)
