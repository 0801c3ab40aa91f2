import numpy as np
import pytest
from hypothesis import given, strategies as st

from amset.metrics import Confusion, aggregate, fdp, mdp, stopping_time_metrics
from amset.procedures import DecisionRecord, weighted_loss


def test_confusion_counts():
    c = Confusion.from_decisions([1, 1, 0, 0, 1], [1, 0, 1, 0, 1])
    assert (c.false_positives, c.true_positives, c.false_negatives) == (1, 2, 1)
    assert c.total_rejections == 3 and c.total_nonnull == 3
    with pytest.raises(ValueError):
        Confusion.from_decisions([1, 0], [1])


def test_fdp_examples():
    assert fdp(Confusion(0, 0, 5)) == 0.0
    assert fdp(Confusion(1, 4, 0)) == pytest.approx(0.2)
    assert fdp(Confusion(3, 0, 2)) == 1.0
    assert mdp(Confusion(0, 0, 0)) == 0.0


def test_aggregate_fdr_versus_mfdr():
    rep = aggregate([Confusion(1, 9, 0), Confusion(0, 0, 0)])
    assert rep.fdr == pytest.approx(0.05)
    # E[FP] / E[R v 1] = 0.5 / 5.5
    assert rep.mfdr == pytest.approx(1 / 11)


def test_single_replication_mfdr_is_fdp():
    c = Confusion(2, 5, 1)
    rep = aggregate([c])
    assert rep.mfdr == fdp(c) and rep.se_fdr == 0.0 and rep.se_mfdr == 0.0


def test_identical_reps_have_zero_se():
    rep = aggregate([Confusion(1, 3, 2)] * 10)
    assert rep.se_fdr == 0 and rep.se_mdr == 0 and rep.se_mfdr == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        aggregate([])


confusions = st.lists(st.builds(Confusion, st.integers(0, 50), st.integers(0, 50), st.integers(0, 50)),
                      min_size=1, max_size=30)


@given(confusions)
def test_rates_in_unit_interval_and_power(cs):
    rep = aggregate(cs)
    for v in (rep.fdr, rep.mfdr, rep.mdr, rep.power):
        assert 0.0 <= v <= 1.0
    assert rep.power == 1.0 - rep.mdr


@given(confusions, st.randoms(use_true_random=False))
def test_aggregate_permutation_invariant(cs, rnd):
    shuffled = list(cs)
    rnd.shuffle(shuffled)
    a, b = aggregate(cs), aggregate(shuffled)
    assert a.fdr == pytest.approx(b.fdr, abs=1e-15)
    assert a.mfdr == pytest.approx(b.mfdr, abs=1e-15)
    assert a.mdr == pytest.approx(b.mdr, abs=1e-15)


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=40),
       st.floats(0.1, 50), st.floats(0.001, 0.5))
def test_loss_decomposes_into_confusion(pairs, lam, alpha):
    theta = np.array([a for a, _ in pairs])
    delta = np.array([b for _, b in pairs])
    c = Confusion.from_decisions(theta, delta)
    expected = (lam * c.false_positives + c.false_negatives - alpha * lam * c.total_rejections) / theta.size
    assert weighted_loss(theta, delta, lam, alpha) == pytest.approx(expected, abs=1e-12)


def _record(decisions, tau):
    d = np.asarray(decisions, dtype=bool)
    return DecisionRecord(d, d.astype(np.int64), tau, [d] * tau)


def test_stopping_time_metrics():
    truths = [np.array([1, 0, 0]), np.array([0, 1, 1])]
    recs = [_record([1, 1, 0], 3), _record([0, 1, 0], 3)]
    direct = aggregate([Confusion.from_decisions(t, r.decisions) for t, r in zip(truths, recs)])
    assert stopping_time_metrics(recs, truths) == direct
    none = stopping_time_metrics([_record([0, 0, 0], 2)] * 2, truths)
    assert none.mfdr == 0.0
    with pytest.raises(ValueError):
        stopping_time_metrics(recs, truths[:1])
