"""False discovery and missed discovery rates across Monte Carlo replications."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Confusion:
    false_positives: int
    true_positives: int
    false_negatives: int

    @property
    def total_rejections(self) -> int:
        return self.false_positives + self.true_positives

    @property
    def total_nonnull(self) -> int:
        return self.true_positives + self.false_negatives

    @classmethod
    def from_decisions(cls, theta, decisions) -> "Confusion":
        theta = np.asarray(theta).astype(bool)
        delta = np.asarray(decisions).astype(bool)
        if theta.shape != delta.shape:
            raise ValueError("truth and decisions differ in shape")
        return cls(int(np.sum(delta & ~theta)), int(np.sum(delta & theta)), int(np.sum(theta & ~delta)))


def fdp(c: Confusion) -> float:
    return c.false_positives / max(c.total_rejections, 1)


def mdp(c: Confusion) -> float:
    """Missed-discovery proportion ``FN / max(#non-null, 1)``."""
    return c.false_negatives / max(c.total_nonnull, 1)


@dataclass(frozen=True)
class MetricsReport:
    fdr: float
    mfdr: float
    mdr: float
    reps: int
    se_fdr: float
    se_mfdr: float
    se_mdr: float

    @property
    def power(self) -> float:
        return 1.0 - self.mdr

    @property
    def se_power(self) -> float:
        return self.se_mdr


def _se(x: np.ndarray) -> float:
    if x.size < 2:
        return 0.0
    return float(np.std(x, ddof=1) / np.sqrt(x.size))


def aggregate(confusions: Sequence[Confusion]) -> MetricsReport:
    """Average over replications.

    FDR and MDR are means of per-replication proportions; mFDR is the ratio
    of mean false positives to mean ``max(rejections, 1)``, with a
    delta-method standard error.
    """
    if len(confusions) == 0:
        raise ValueError("no replications to aggregate")
    fp = np.array([c.false_positives for c in confusions], dtype=float)
    rej = np.array([max(c.total_rejections, 1) for c in confusions], dtype=float)
    fdps = np.array([fdp(c) for c in confusions])
    mdps = np.array([mdp(c) for c in confusions])
    n = fp.size
    a, b = fp.mean(), rej.mean()
    mfdr = a / b
    if n > 1:
        cov = np.cov(fp, rej, ddof=1)
        var = (cov[0, 0] - 2 * mfdr * cov[0, 1] + mfdr ** 2 * cov[1, 1]) / (b * b * n)
        se_mfdr = float(np.sqrt(max(var, 0.0)))
    else:
        se_mfdr = 0.0
    return MetricsReport(float(fdps.mean()), float(mfdr), float(mdps.mean()), n,
                         _se(fdps), se_mfdr, _se(mdps))


def stopping_time_metrics(records, truths) -> MetricsReport:
    """Aggregate each replication's decisions at its own stopping stage.

    ``records`` are :class:`~amset.procedures.DecisionRecord` objects whose
    ``decisions`` field already holds the decisions at ``tau``.
    """
    if len(records) != len(truths):
        raise ValueError("one truth vector per record is required")
    conf = []
    for rec, truth in zip(records, truths):
        theta = getattr(truth, "theta", truth)
        conf.append(Confusion.from_decisions(theta, rec.decisions))
    return aggregate(conf)
