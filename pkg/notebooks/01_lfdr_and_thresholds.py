# %% [markdown]
# # Local fdr and the two thresholding rules
#
# Each A/B test contributes one z-score per stage.  Under the two-groups
# model a test is null with probability 1 - p, in which case its scores are
# N(0, 1); otherwise they come from a Gaussian mixture.  The local false
# discovery rate is the posterior probability of the null given every score
# seen so far.

# %%
import numpy as np

from amset.lfdr import LfdrState
from amset.model import GaussianMixture, TwoGroupsModel, assign_effects, sample_ground_truth, sample_matrix, stream
from amset.procedures import compound_mask, simple_mask

# %%
model = TwoGroupsModel(0.05, GaussianMixture.point(2.0))
truth = assign_effects(sample_ground_truth(2000, model.p, stream(1, 0)), model.alt, stream(1, 1))
x = sample_matrix(model, truth, 5, 1, 2)
x.shape, truth.theta.sum()

# %% [markdown]
# The lfdr sharpens as stages accumulate: non-null tests drift towards 0,
# nulls towards 1.

# %%
state = LfdrState(truth.m, model.alt)
everyone = np.arange(truth.m)
for t in range(5):
    state.update(everyone, x[:, t])
    lf = state.values(everyone, model.p)
    print(t + 1, "median lfdr  null %.3f  non-null %.3f" % (np.median(lf[truth.theta == 0]),
                                                            np.median(lf[truth.theta == 1])))

# %% [markdown]
# Simple thresholding rejects every lfdr below alpha.  The compound rule
# rejects the largest set whose average lfdr stays below alpha, which is
# always at least as large.

# %%
alpha = 0.05
simple, compound = simple_mask(lf, alpha), compound_mask(lf, alpha)
for name, rej in (("simple", simple), ("compound", compound)):
    fp = np.sum(rej & (truth.theta == 0))
    print(f"{name:8s} rejections {rej.sum():4d}  false {fp:3d}  mean lfdr {lf[rej].mean():.4f}")
assert np.all(compound[simple])
