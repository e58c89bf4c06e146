import json
import math

import numpy as np
import pytest

from wassreg.errors import ConfigMismatchError, DataError, ModelFormatError, ModelVersionError
from wassreg.measures import DiscreteMeasure, MeasureDataset, PairIndex, sample_pairs
from wassreg.regression import (
    DesignMatrix,
    RegressionModel,
    build_design,
    fit,
    fit_constrained_general,
    fit_constrained_k1,
    fit_unconstrained,
    load_model,
    predict,
    predict_array,
    save_model,
)
from wassreg.sliced import FeatureVector, PredictorConfig, preset


def _loss(S, W, w):
    r = S @ w - W
    return float(r @ r)


def test_unconstrained_examples():
    m = fit_unconstrained(DesignMatrix(np.array([[1.0], [2.0], [3.0]]), np.array([2.0, 4.0, 6.0])))
    assert m.weights[0] == pytest.approx(2.0, abs=1e-14)
    m = fit_unconstrained(DesignMatrix(np.array([[1.0, 0], [0, 1], [1, 1]]), np.array([1.0, 2, 3])))
    np.testing.assert_allclose(m.weights, [1.0, 2.0], atol=1e-14)
    assert m.fit_report["rank"] == 2 and not m.fit_report["rank_deficient"]


def test_unconstrained_local_optimality(rng):
    S, W = rng.uniform(0, 2, (30, 4)), rng.uniform(0, 2, 30)
    w = fit_unconstrained(DesignMatrix(S, W)).weights
    base = _loss(S, W, w)
    for _ in range(100):
        delta = rng.normal(size=4)
        assert base <= _loss(S, W, w + 1e-3 * delta / np.linalg.norm(delta))


def test_rank_deficient_gives_min_norm():
    S = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    m = fit_unconstrained(DesignMatrix(S, np.array([2.0, 4.0, 6.0])))
    np.testing.assert_allclose(m.weights, [1.0, 1.0], atol=1e-12)
    assert m.fit_report["rank_deficient"]


def test_underdetermined_warns():
    with pytest.warns(UserWarning):
        fit_unconstrained(DesignMatrix(np.array([[1.0, 2.0, 3.0]]), np.array([1.0])))


@pytest.mark.parametrize(
    "target, expect",
    [("upper", 0.0), ("lower", 1.0), ("mid", 0.5)],
)
def test_k1_examples(rng, target, expect):
    SL = rng.uniform(0, 1, 20)
    SU = SL + rng.uniform(0.1, 1, 20)
    W = {"upper": SU, "lower": SL, "mid": (SL + SU) / 2}[target]
    m = fit_constrained_k1(DesignMatrix(np.c_[SL, SU], W), 0, 1)
    assert m.weights[0] == pytest.approx(expect, abs=1e-12)


def test_k1_clamps_violations():
    S = np.c_[np.zeros(5), np.ones(5)]
    m = fit_constrained_k1(DesignMatrix(S, np.full(5, 2.0)), 0, 1)
    assert m.fit_report["closed_form"] < 0 and m.weights[0] == 0.0


def test_k1_degenerate():
    S = np.c_[np.arange(4.0), np.arange(4.0)]
    m = fit_constrained_k1(DesignMatrix(S, np.arange(4.0)), 0, 1)
    assert m.weights[0] == 0.5 and m.fit_report["degenerate"]
    m = fit_constrained_k1(DesignMatrix(np.zeros((3, 2)), np.zeros(3)), 0, 1)
    assert m.fit_report["degenerate"]


def test_general_recovers_noiseless_weights(rng):
    SL = rng.uniform(0, 1, (40, 2))
    SU = SL + rng.uniform(0.5, 2, (40, 2))
    w = np.array([0.3, 0.7])
    W = (SL * w + SU * (1 - w)).mean(axis=1)
    m = fit_constrained_general(DesignMatrix(np.c_[SL, SU], W), (0, 1), (2, 3))
    np.testing.assert_allclose(m.weights, w, atol=1e-6)


def test_general_boundary_optimum(rng):
    SL = rng.uniform(1, 2, (20, 3))
    SU = SL + 1
    m = fit_constrained_general(DesignMatrix(np.c_[SL, SU], np.zeros(20)), (0, 1, 2), (3, 4, 5))
    np.testing.assert_allclose(m.weights, np.ones(3), atol=1e-12)


def test_general_k1_matches_closed_form(rng):
    for _ in range(30):
        S, W = rng.uniform(0, 3, (15, 2)), rng.uniform(0, 3, 15)
        a = fit_constrained_k1(DesignMatrix(S, W), 0, 1).weights[0]
        b = fit_constrained_general(DesignMatrix(S, W), (0,), (1,)).weights[0]
        assert abs(a - b) <= 1e-8


def test_general_mismatched_pairing():
    with pytest.raises(DataError):
        fit_constrained_general(DesignMatrix(np.ones((3, 3)), np.ones(3)), (0, 1), (2,))


def test_design_validation():
    with pytest.raises(DataError):
        DesignMatrix(np.ones((3, 2)), np.ones(2))
    with pytest.raises(DataError):
        DesignMatrix(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(DataError):
        DesignMatrix(np.array([[np.nan]]), np.ones(1))


def test_predict_examples():
    cfg_s = preset("rg-s").configs
    con = RegressionModel(np.array([0.5]), cfg_s, True, (0,), (1,))
    assert predict(con, FeatureVector(np.array([1.0, 3.0]), cfg_s)) == 2.0
    assert predict(con, FeatureVector(np.zeros(2), cfg_s)) == 0.0
    unc = RegressionModel(np.array([1.0, 2.0]), cfg_s, False)
    assert predict(unc, FeatureVector(np.array([1.0, 1.0]), cfg_s)) == 3.0
    neg = RegressionModel(np.array([-1.0, 0.0]), cfg_s, False)
    assert predict(neg, FeatureVector(np.array([1.0, 1.0]), cfg_s)) == 0.0
    with pytest.raises(ConfigMismatchError):
        predict(unc, FeatureVector(np.array([1.0, 1.0]), preset("rg-e").configs))


def test_constrained_prediction_within_bounds(rng):
    S = rng.uniform(0, 1, (50, 4))
    S[:, 2:] += S[:, :2]
    m = RegressionModel(rng.uniform(0, 1, 2), (), True, (0, 1), (2, 3))
    pred = predict_array(m, S)
    assert np.all(pred >= S[:, :2].min(axis=1) - 1e-12) and np.all(pred <= S[:, 2:].max(axis=1) + 1e-12)


def _dataset(rng, count=6, n=10):
    return MeasureDataset(tuple(DiscreteMeasure(rng.normal(size=(n, 2)) + k) for k in range(count)))


def test_build_design_shapes(rng):
    ds = _dataset(rng)
    cfgs = preset("rg-s").configs
    d0 = build_design(ds, [PairIndex(2, 2)], cfgs, 0)
    np.testing.assert_array_equal(d0.S, [[0.0, 0.0]])
    assert d0.W[0] == 0.0
    pairs = sample_pairs(ds, 5, 0, "all-unordered")
    d = build_design(ds, pairs, cfgs, 0)
    assert d.S.shape == (10, 2) and np.all(d.S[:, 1] >= d.S[:, 0] - 1e-12)
    labels = {(q.i, q.j): w for q, w in zip(pairs, d.W)}
    again = build_design(ds, pairs, cfgs, 0, labels=labels, threads=2)
    np.testing.assert_array_equal(again.S, d.S)
    with pytest.raises(DataError):
        build_design(ds, pairs, cfgs, 0, labels={})


def test_fit_dispatch_and_train_pairs(rng):
    ds = _dataset(rng)
    pairs = sample_pairs(ds, 5, 0, "all-unordered")
    pre = preset("rg-se")
    design = build_design(ds, pairs, pre.configs, 0)
    m = fit(design, pre.configs, True, pre.lower_idx, pre.upper_idx, seed=0, preset="rg-se")
    assert m.constrained and len(m.weights) == 2 and m.M == 10
    assert m.train_pairs == tuple((q.i, q.j) for q in pairs)
    assert m.fit_report["rmse"] == pytest.approx(math.sqrt(np.mean((predict_array(m, design.S) - design.W) ** 2)), abs=1e-12)


def test_save_load_round_trip(tmp_path, rng):
    cfgs = preset("rg-seo").configs
    S, W = rng.uniform(0, 1, (20, 6)), rng.uniform(0, 1, 20)
    m = fit_unconstrained(DesignMatrix(S, W), cfgs, seed=3, preset="rg-seo")
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert back.configs == m.configs and back.seed == 3 and back.fit_report == json.loads(json.dumps(m.fit_report))
    X = rng.uniform(0, 2, (100, 6))
    assert np.max(np.abs(predict_array(back, X) - predict_array(m, X))) <= 1e-15
    np.testing.assert_array_equal(back.weights, m.weights)


def test_load_errors(tmp_path, rng):
    m = fit_unconstrained(DesignMatrix(rng.uniform(0, 1, (5, 2)), rng.uniform(0, 1, 5)), preset("rg-s").configs)
    save_model(m, tmp_path / "m.json")
    text = (tmp_path / "m.json").read_text()
    (tmp_path / "trunc.json").write_text(text[: len(text) // 2])
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "trunc.json")
    doc = json.loads(text)
    doc["configs"][0]["kind"] = "Wormhole"
    (tmp_path / "kind.json").write_text(json.dumps(doc))
    with pytest.raises(ModelVersionError):
        load_model(tmp_path / "kind.json")
    doc = json.loads(text)
    doc["version"] = 99
    (tmp_path / "ver.json").write_text(json.dumps(doc))
    with pytest.raises(ModelVersionError):
        load_model(tmp_path / "ver.json")
    with pytest.raises(DataError):
        load_model(tmp_path / "missing.json")


def test_constrained_model_rejects_out_of_box_weights():
    with pytest.raises(DataError):
        RegressionModel(np.array([1.5]), (), True, (0,), (1,))
    cfg = PredictorConfig.default("SW")
    assert RegressionModel(np.array([1.5]), (cfg,), False).weights[0] == 1.5
