"""Sliced bounds around the exact distance, and the weight that blends them.

Run:  python3 demos/01_bounds_and_weights.py
"""

from wassreg import GaussianMixtureSpec, SeedSpec, exact_wasserstein, preset, sample_gaussian_mixture
from wassreg.experiments import mixture_pairs
from wassreg.regression import design_from_measures, fit_constrained_k1
from wassreg.sliced import evaluate_features

# two 3-component mixtures in 5 dimensions
mu = sample_gaussian_mixture(GaussianMixtureSpec(d=5, seed=SeedSpec(0, 1)))
nu = sample_gaussian_mixture(GaussianMixtureSpec(d=5, seed=SeedSpec(0, 2)))

seo = preset("rg-seo")
feats = evaluate_features(mu, nu, seo.configs, seed=0).values
w = exact_wasserstein(mu, nu).distance(2)

print("lower bounds   SW %.3f  EBSW %.3f  Max-SW %.3f" % tuple(feats[:3]))
print("exact          W  %.3f" % w)
print("upper bounds   PW %.3f  EST  %.3f  Min-SWGG %.3f" % tuple(feats[3:]))

# where does W sit between SW and PW as the dimension grows?
template = GaussianMixtureSpec(d=1, points_per_component=50)
rg_s = preset("rg-s")
print("\n  d   omega (weight on SW)")
for d in (2, 5, 20, 50):
    design = design_from_measures(mixture_pairs(template, 30, seed=0, d=d), rg_s.configs, seed=0)
    omega = fit_constrained_k1(design, 0, 1).weights[0]
    print(f"{d:3d}   {omega:.3f}  " + "#" * int(round(40 * omega)))

# the lower bound loses weight: projections capture less of the distance in high d
