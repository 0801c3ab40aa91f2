# %% [markdown]
# # Fitting the prior from historical experiments
#
# In practice p and the alternative are unknown.  They are estimated from a
# column of historical z-scores: the proportion from the empirical
# characteristic function, the mixing distribution by NPMLE on a grid, and
# the alternative by discarding the most null-like mass.

# %%
import numpy as np

from amset.avpv import PriorSpec, optimizely_run
from amset.estimate import fit_model
from amset.model import stream

# %%
rng = stream(9, 0)
z = rng.standard_normal(10_000) + 1.61 * (rng.random(10_000) < 0.03)
fm = fit_model(z)
print("p_hat %.4f" % fm.p_hat)
print("f1_hat support points", len(fm.f1_hat.components))
print("f1_hat mean %.3f" % fm.f1_hat.mean)

# %% [markdown]
# The baseline competitor runs an mSPRT per test and applies BH to the
# always-valid p-values at each stage.  A normal prior gives a closed form
# for the mixture likelihood ratio.

# %%
g = stream(9, 1)
theta = g.random(3000) < 0.05
x = g.standard_normal((3000, 5)) + 2.0 * theta[:, None]
rec = optimizely_run(x, PriorSpec.normal(2.0), 0.05, 5)
r = rec.decisions
print("rejections", r.sum(), " false", np.sum(r & ~theta), " missed", np.sum(theta & ~r))
