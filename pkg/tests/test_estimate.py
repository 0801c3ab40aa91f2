import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amset.estimate import (DeconvolutionResult, EstimationError, FittedModel, NoAlternativeError,
                            estimate_proportion, fit_model, npmle_deconvolve, parse_recovery,
                            recover_alternative)
from amset.model import GaussianMixture, stream

from oracles import simplex_search


def draw(seed, comps, n=10_000):
    rng = stream(seed, 99)
    mus = np.array([c[0] for c in comps])
    w = np.array([c[1] for c in comps])
    return mus[rng.choice(len(mus), size=n, p=w)] + rng.standard_normal(n)


def deconv_of(comps):
    mu, w = zip(*comps)
    return DeconvolutionResult(np.array(mu, dtype=float), np.array(w, dtype=float), 0.0, 0)


SETTING1 = [(0.0, 0.97), (1.61, 0.03)]
SETTING2 = [(0.0, 0.98), (1.32, 0.01), (1.6, 0.01)]
SETTING3 = [(0.0, 0.96), (3.35, 0.01), (3.36, 0.01), (17.81, 0.01), (19.88, 0.01)]


def test_proportion_constant_zero_input():
    assert estimate_proportion(np.zeros(500)) == 0.0


def test_proportion_rejects_small_or_bad_samples():
    with pytest.raises(EstimationError):
        estimate_proportion(np.zeros(99))
    with pytest.raises(EstimationError):
        estimate_proportion(np.r_[np.zeros(200), np.nan])


def test_proportion_permutation_invariant():
    z = draw(3, [(0.0, 0.9), (2.0, 0.1)], n=2000)
    perm = stream(4).permutation(z.size)
    assert estimate_proportion(z) == estimate_proportion(z[perm])


@pytest.mark.slow
def test_proportion_calibration_bands():
    null = [estimate_proportion(draw(s, [(0.0, 1.0)])) for s in range(20)]
    mixed = [estimate_proportion(draw(s, [(0.0, 0.95), (2.0, 0.05)])) for s in range(20)]
    assert np.mean(np.array(null) <= 0.02) >= 0.95
    assert np.mean((np.array(mixed) >= 0.02) & (np.array(mixed) <= 0.09)) >= 0.90


def test_npmle_first_step_and_overall_ascent():
    z = draw(1, SETTING1, n=3000)
    one = npmle_deconvolve(z, max_iter=1)
    assert one.history[1] >= one.history[0]
    full = npmle_deconvolve(z)
    assert full.loglik >= full.history[0]
    assert np.all(np.diff(full.history) >= 0)
    assert full.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(full.grid_means) > 0)


def test_npmle_pure_null_concentrates_near_zero():
    res = npmle_deconvolve(draw(0, [(0.0, 1.0)]))
    assert sum(w for m, w in res.components if abs(m) <= 0.5) >= 0.9


def test_npmle_setting1_tail_weight():
    res = npmle_deconvolve(draw(0, SETTING1))
    assert 0.005 <= sum(w for m, w in res.components if m >= 1) <= 0.08


def test_npmle_nonconvergence_is_flagged():
    res = npmle_deconvolve(draw(2, SETTING1, n=500), max_iter=3, tol=0.0)
    assert not res.converged and res.iterations == 3


def test_npmle_interior_solver_reaches_higher_likelihood():
    z = draw(5, SETTING1, n=2000)
    em = npmle_deconvolve(z)
    ip = npmle_deconvolve(z, solver="interior")
    assert ip.loglik >= em.loglik - 1e-6
    with pytest.raises(ValueError):
        npmle_deconvolve(z, solver="simplex")


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_npmle_matches_simplex_grid_search(seed):
    grid = np.array([-4.0, -2.0, 0.0, 2.0, 4.0])
    rng = stream(seed)
    z = grid[rng.choice(5, size=50, p=[0.2, 0.0, 0.5, 0.3, 0.0])] + rng.standard_normal(50)
    L = np.exp(-0.5 * (z[:, None] - grid) ** 2) / np.sqrt(2 * np.pi)
    _, best = simplex_search(L)
    res = npmle_deconvolve(z, (-4.0, 4.0, 5), tol=1e-15, max_iter=200_000, bins=None, min_n=1)
    w = np.zeros(5)
    for mu, wk in res.components:
        w[np.argmin(np.abs(grid - mu))] = wk
    assert np.max(np.abs(w - best)) <= 0.01


def test_recover_setting1_table():
    f1 = recover_alternative(deconv_of(SETTING1), 0.03)
    assert f1.components == [(1.61, 1.0)]


def test_recover_no_alternative():
    for method in ("data_driven", ("hard", 1.0), "hard:0.5"):
        with pytest.raises(NoAlternativeError):
            recover_alternative(deconv_of([(0.0, 1.0)]), 0.05, method)


def test_recover_setting3_hard_threshold():
    f1 = recover_alternative(deconv_of(SETTING3), 0.04, ("hard", 1.0))
    assert f1.means == (3.35, 3.36, 17.81, 19.88)
    assert f1.weights == pytest.approx((0.25,) * 4, abs=1e-12)


def test_recover_inclusive_keeps_boundary_component():
    d = deconv_of([(0.0, 0.5), (0.4, 0.47), (2.0, 0.03)])
    assert recover_alternative(d, 0.03).means == (2.0,)
    assert recover_alternative(d, 0.03, inclusive=True).means == (0.4, 2.0)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(-6, 6), st.floats(0.001, 1.0)), min_size=2, max_size=12,
                unique_by=lambda c: c[0]),
       st.floats(0.01, 0.5))
def test_recovered_weights_renormalized(comps, p_hat):
    comps = sorted(comps)
    total = sum(w for _, w in comps)
    d = deconv_of([(m, w / total) for m, w in comps])
    try:
        f1 = recover_alternative(d, p_hat)
    except NoAlternativeError:
        return
    assert sum(f1.weights) == pytest.approx(1.0, abs=1e-9)


def test_parse_recovery():
    assert parse_recovery("data_driven") == "data_driven"
    assert parse_recovery("hard:1.5") == ("hard", 1.5)
    assert parse_recovery("hard") == ("hard", 1.0)
    with pytest.raises(ValueError):
        parse_recovery("classification")


def test_fit_model_falls_back_on_pure_null():
    # p_hat = 0 for these seeds, so the data-driven rule has nothing to split
    fm = fit_model(draw(4, [(0.0, 1.0)], n=2000))
    assert fm.p_hat == 0.0 and fm.provenance["fallback"] is True
    assert all(abs(m) >= 1.0 for m in fm.f1_hat.means)
    # and when the fit has no mass beyond |mu| = 1 the fallback fails too
    with pytest.raises(NoAlternativeError):
        fit_model(draw(1, [(0.0, 1.0)], n=2000))


def test_fit_model_deterministic_and_roundtrips(tmp_path):
    z = draw(7, SETTING1, n=3000)
    a, b = fit_model(z), fit_model(z)
    assert a.to_dict() == b.to_dict()
    path = tmp_path / "model.json"
    a.save(path)
    c = FittedModel.load(path)
    assert c.p == a.p and c.alt == a.alt
    with pytest.raises(ValueError):
        FittedModel(1.0, GaussianMixture.point(1.0))


@pytest.mark.slow
@pytest.mark.xfail(strict=False, reason="Setting 2 is weakly identified at n=1e4; the data-driven rule "
                                        "lands in the band for about half of the seeds (see decisions ledger)")
def test_fit_model_setting2_band():
    means = np.array([fit_model(draw(s, SETTING2)).f1_hat.mean for s in range(20)])
    rate = np.mean((means >= 1.0) & (means <= 2.0))
    print(f"setting 2: f1_hat mean in [1, 2] for {rate:.0%} of seeds")
    assert rate >= 0.8
