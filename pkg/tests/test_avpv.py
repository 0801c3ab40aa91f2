import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from amset.avpv import (AvpvState, PriorSpec, bh, bh_mask, lfdr_avpv_update, lfdr_odds, msprt_log_lambda,
                        msprt_update, optimizely_run)
from amset.lfdr import LfdrState
from amset.model import GaussianMixture

from oracles import bh_direct


def log_lambda_quad(s, n, tau_sq):
    """log of int exp(theta*S - n*theta^2/2) N(theta; 0, tau_sq) dtheta by quadrature."""
    prec = n + 1.0 / tau_sq

    def expo(th):
        return th * s - 0.5 * prec * th * th

    peak = s / prec
    c = expo(peak)
    width = 40.0 / math.sqrt(prec)
    val, _ = quad(lambda th: math.exp(expo(th) - c), peak - width, peak + width,
                  points=[peak], epsabs=0.0, epsrel=1e-13, limit=200)
    return c + math.log(val) - 0.5 * math.log(2 * math.pi * tau_sq)


def test_point_prior_example():
    st_ = AvpvState(1).msprt_update(0, 0.0, PriorSpec.point(2.0))
    assert st_.log_lambda[0] == pytest.approx(-2.0)
    assert math.exp(st_.log_lambda[0]) == pytest.approx(0.13534, abs=1e-5)
    assert st_.p_running[0] == 1.0


def test_null_point_prior_is_flat():
    st_ = AvpvState(3)
    rng = np.random.default_rng(0)
    for _ in range(6):
        msprt_update(st_, [0, 1, 2], rng.standard_normal(3), PriorSpec.point(0.0))
        assert np.all(st_.log_lambda == 0.0)


def test_normal_prior_example():
    st_ = AvpvState(1).msprt_update(0, 0.0, PriorSpec.normal(2.0))
    assert math.exp(st_.log_lambda[0]) == pytest.approx(math.sqrt(1 / 3), abs=1e-12)
    assert st_.log_lambda[0] == pytest.approx(log_lambda_quad(0.0, 1, 2.0), abs=1e-8)


@pytest.mark.parametrize("s,n,tau_sq", [(0.0, 1, 2.0), (3.5, 4, 2.0), (-50.0, 100, 2.0), (50.0, 1, 0.5),
                                         (12.0, 37, 5.0), (-7.3, 2, 1.0)])
def test_normal_prior_closed_form_vs_quadrature(s, n, tau_sq):
    got = msprt_log_lambda(s, n, PriorSpec.normal(tau_sq))
    assert got == pytest.approx(log_lambda_quad(s, n, tau_sq), abs=1e-8)


def test_prior_validation():
    with pytest.raises(ValueError):
        PriorSpec("cauchy")
    with pytest.raises(ValueError):
        PriorSpec.normal(0.0)


@settings(max_examples=50)
@given(st.lists(st.floats(-4, 6), min_size=1, max_size=15), st.sampled_from(["point", "normal"]))
def test_pvalue_process_monotone_and_bounded(xs, kind):
    prior = PriorSpec.point(2.0) if kind == "point" else PriorSpec.normal(2.0)
    st_ = AvpvState(1)
    prev = 1.0
    for x in xs:
        st_.msprt_update(0, x, prior)
        p = st_.p_running[0]
        assert 0.0 < p <= 1.0
        assert p <= prev
        assert p == pytest.approx(min(prev, min(1.0, math.exp(-st_.log_lambda[0]))), rel=1e-14)
        prev = p


def test_lfdr_martingale_examples():
    st_ = AvpvState(1).lfdr_avpv_update(0, 0.0, 0.05, GaussianMixture.point(2.0))
    assert st_.log_lambda[0] == pytest.approx(-2.0)
    flat = AvpvState(2)
    for x in (0.3, -1.2, 4.0):
        lfdr_avpv_update(flat, [0, 1], [x, -x], 0.05, GaussianMixture.point(0.0))
    assert np.all(flat.log_lambda == 0.0) and np.all(flat.p_running == 1.0)


@settings(max_examples=50)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8))
def test_lfdr_odds_identity(xs):
    alt = GaussianMixture([1.0, 2.5], [0.4, 0.6])
    lf = LfdrState(1, alt)
    mg = AvpvState(1)
    for x in xs:
        lf.update(0, x)
        mg.lfdr_avpv_update(0, x, 0.05, alt)
    t_dd = lf.lfdr_value(0, 0.05)
    if 1e-12 < t_dd < 1 - 1e-12:
        assert lfdr_odds(t_dd, 0.05) == pytest.approx(math.exp(mg.log_lambda[0]), rel=1e-8)


def test_state_refuses_to_mix_kinds():
    st_ = AvpvState(1).msprt_update(0, 1.0, PriorSpec.point(1.0))
    with pytest.raises(ValueError):
        st_.lfdr_avpv_update(0, 1.0, 0.05, GaussianMixture.point(1.0))
    with pytest.raises(ValueError):
        AvpvState(1).lfdr_avpv_update(0, 1.0, 0.0, GaussianMixture.point(1.0))


def test_bh_examples():
    assert bh([0.01, 0.04, 0.9], 0.05) == {0}
    assert bh([1.0, 1.0, 1.0], 0.05) == set()
    assert bh([0.0, 0.0], 0.05) == {0, 1}
    assert bh([0.05], 0.05) == {0} and bh([0.0501], 0.05) == set()
    with pytest.raises(ValueError):
        bh([0.5, 1.2], 0.05)


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=40), st.floats(0.001, 0.5))
def test_bh_matches_step_up_oracle(pvals, alpha):
    assert bh(pvals, alpha) == bh_direct(pvals, alpha)


def test_optimizely_single_stage_is_bh():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((300, 1)) + 2.0 * (rng.random((300, 1)) < 0.1)
    prior = PriorSpec.point(2.0)
    rec = optimizely_run(x, prior, 0.05, 1)
    p = np.minimum(1.0, np.exp(-np.maximum(prior.log_lambda(x[:, 0], 1), 0)))
    assert np.array_equal(rec.decisions, bh_mask(p, 0.05))


def test_optimizely_rejections_persist():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((500, 6)) + 1.5 * (rng.random((500, 1)) < 0.2)
    rec = optimizely_run(x, PriorSpec.normal(2.0), 0.05, 6)
    for t in range(2, rec.tau + 1):
        assert np.all(rec.at(t - 1) <= rec.at(t))
    rec_mg = optimizely_run(x, GaussianMixture.point(1.5), 0.05, 6)
    assert rec_mg.decisions.any()


def test_optimizely_callable_source():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((40, 3)) + 3.0
    a = optimizely_run(lambda t, idx: x[idx, t - 1], PriorSpec.point(3.0), 0.05, 3, m=40)
    b = optimizely_run(x, PriorSpec.point(3.0), 0.05, 3)
    assert np.array_equal(a.rejection_stage, b.rejection_stage)
    with pytest.raises(ValueError):
        optimizely_run(lambda t, idx: x[idx, t - 1], PriorSpec.point(3.0), 0.05, 3)


@pytest.mark.parametrize("prior", [PriorSpec.point(2.0), PriorSpec.normal(2.0), GaussianMixture.point(0.5)],
                         ids=["point", "normal", "lfdr"])
def test_null_crossing_rate_at_fixed_horizon(prior):
    # P(p_T <= s) <= s under the null, checked at T = 10 over 20000 coordinates
    rng = np.random.default_rng(77)
    x = rng.standard_normal((20000, 10))
    st_ = AvpvState(20000)
    for t in range(10):
        if isinstance(prior, GaussianMixture):
            st_.lfdr_avpv_update(np.arange(20000), x[:, t], 0.05, prior)
        else:
            st_.msprt_update(np.arange(20000), x[:, t], prior)
    for s in (0.01, 0.05, 0.1):
        rate = np.mean(st_.p_running <= s)
        assert rate <= s + 2 * math.sqrt(s * (1 - s) / 20000)
