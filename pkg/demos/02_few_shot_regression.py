"""Fit on a handful of exact distances, predict the rest.

Run:  python3 demos/02_few_shot_regression.py
"""

import time

from wassreg import GaussianMixtureSpec, fit, metrics, predict_array, preset
from wassreg.experiments import mixture_pairs
from wassreg.regression import DesignMatrix, design_from_measures

template = GaussianMixtureSpec(d=3, points_per_component=60)
pairs = mixture_pairs(template, 300, seed=1, d=3)

t = time.perf_counter()
design = design_from_measures(pairs, preset("rg-seo").configs, seed=1)
print(f"features + exact labels for {len(pairs)} pairs: {time.perf_counter() - t:.1f}s")

for name in ("rg-s", "rg-se", "rg-seo"):
    pre = preset(name)
    cols = [k for k, c in enumerate(preset("rg-seo").configs) if c in pre.configs]
    S = design.S[:, cols]
    for M in (10, 50):
        model = fit(DesignMatrix(S[:M], design.W[:M]), pre.configs, False)
        rep = metrics(predict_array(model, S[M:]), design.W[M:])
        print(f"{name:7s} M={M:3d}  R2={rep.r2:.3f}  MAE={rep.mae:.3f}")

# weights of the last fit, one per predictor
print("\nweights:", dict(zip([c.kind for c in pre.configs], (round(float(w), 3) for w in model.weights))))
