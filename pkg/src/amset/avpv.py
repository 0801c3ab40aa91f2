"""Always-valid p-values from mixture SPRTs, BH, and the lfdr martingale.

For unit-variance normal data with null mean 0 the mixture likelihood ratio
has closed forms for the two priors used here::

    point(mu):      log Lambda_T = mu*S_T - T*mu**2/2
    normal(tau^2):  log Lambda_T = -log(1 + T*tau^2)/2 + tau^2*S_T**2 / (2*(1 + T*tau^2))

with ``S_T`` the running sum.  The p-value process is the running minimum of
``min(1, 1/Lambda_T)`` starting from 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import CLAMP, GaussianMixture, mixture_log_pdf, standard_normal_log_pdf
from .procedures import DecisionRecord


@dataclass(frozen=True)
class PriorSpec:
    kind: str
    mu: float = 0.0
    tau_sq: float = 1.0

    def __post_init__(self):
        if self.kind not in ("point", "normal"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.kind == "normal" and not self.tau_sq > 0:
            raise ValueError("normal prior needs tau_sq > 0")

    @classmethod
    def point(cls, mu: float) -> "PriorSpec":
        return cls("point", mu=float(mu))

    @classmethod
    def normal(cls, tau_sq: float = 2.0) -> "PriorSpec":
        return cls("normal", tau_sq=float(tau_sq))

    def log_lambda(self, s, n):
        s = np.asarray(s, dtype=float)
        n = np.asarray(n, dtype=float)
        if self.kind == "point":
            return self.mu * s - 0.5 * n * self.mu ** 2
        v = 1.0 + n * self.tau_sq
        return -0.5 * np.log(v) + self.tau_sq * s * s / (2.0 * v)


def msprt_log_lambda(s, n, prior: PriorSpec):
    return prior.log_lambda(s, n)


class AvpvState:
    """Per-coordinate likelihood-ratio statistic and running-min p-value.

    One state tracks either mSPRT statistics (``msprt_update``) or the lfdr
    martingale ``L = prod f1_hat / prod f0`` (``lfdr_avpv_update``), not both.
    """

    def __init__(self, m: int):
        self.sum_x = np.zeros(m)
        self.n = np.zeros(m, dtype=np.int64)
        self.log_lambda = np.zeros(m)
        self.p_running = np.ones(m)
        self.kind: str | None = None

    @property
    def m(self) -> int:
        return self.n.size

    def _claim(self, kind: str):
        if self.kind is None:
            self.kind = kind
        elif self.kind != kind:
            raise ValueError(f"state already tracks {self.kind} statistics")

    def _refresh_p(self, i):
        # 1/Lambda capped at 1 before the running minimum
        inv = np.exp(-np.maximum(self.log_lambda[i], 0.0))
        self.p_running[i] = np.minimum(self.p_running[i], inv)

    def msprt_update(self, i, x, prior: PriorSpec) -> "AvpvState":
        self._claim("msprt")
        i = np.atleast_1d(np.asarray(i, dtype=np.intp))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        self.sum_x[i] += x
        self.n[i] += 1
        self.log_lambda[i] = prior.log_lambda(self.sum_x[i], self.n[i])
        self._refresh_p(i)
        return self

    def lfdr_avpv_update(self, i, x, p_hat: float, f1_hat: GaussianMixture) -> "AvpvState":
        """Accumulate ``log f1_hat(x) - log f0(x)``.

        ``p_hat`` does not enter ``L``; it only matters for the link back to
        the data-driven lfdr (see :func:`lfdr_odds`).
        """
        if not 0.0 < p_hat < 1.0:
            raise ValueError("p_hat must lie in (0, 1)")
        self._claim("lfdr")
        i = np.atleast_1d(np.asarray(i, dtype=np.intp))
        x = np.clip(np.atleast_1d(np.asarray(x, dtype=float)), -CLAMP, CLAMP)
        self.sum_x[i] += x
        self.n[i] += 1
        self.log_lambda[i] += mixture_log_pdf(f1_hat, x) - standard_normal_log_pdf(x)
        self._refresh_p(i)
        return self


def msprt_update(state: AvpvState, i, x, prior: PriorSpec) -> AvpvState:
    return state.msprt_update(i, x, prior)


def lfdr_avpv_update(state: AvpvState, i, x, p_hat: float, f1_hat: GaussianMixture) -> AvpvState:
    return state.lfdr_avpv_update(i, x, p_hat, f1_hat)


def lfdr_odds(lfdr, p_hat: float):
    """``((1-p_hat)/p_hat) * ((1-lfdr)/lfdr)``: the likelihood ratio behind
    a data-driven lfdr value."""
    lfdr = np.asarray(lfdr, dtype=float)
    return (1.0 - p_hat) / p_hat * (1.0 - lfdr) / lfdr


def bh_mask(pvalues, alpha: float) -> np.ndarray:
    p = np.asarray(pvalues, dtype=float)
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    if m == 0:
        return np.zeros(0, dtype=bool)
    s = np.sort(p)
    ok = np.flatnonzero(s <= alpha * np.arange(1, m + 1) / m)
    if ok.size == 0:
        return np.zeros(m, dtype=bool)
    return p <= s[ok[-1]]


def bh(pvalues, alpha: float) -> set[int]:
    """Benjamini-Hochberg step-up; returns the rejected positions."""
    return set(np.flatnonzero(bh_mask(pvalues, alpha)).tolist())


def optimizely_run(observations, prior: PriorSpec | GaussianMixture, alpha: float,
                   max_stages: int, stopping: Callable[[int, np.ndarray], bool] | None = None,
                   m: int | None = None) -> DecisionRecord:
    """BH on always-valid p-values at every stage; rejections are permanent.

    ``prior`` may be a :class:`PriorSpec` (mSPRT p-values) or a fitted
    alternative mixture, in which case the lfdr martingale supplies the
    p-values.  ``observations`` follows :func:`amset.procedures.run`.
    """
    if callable(observations):
        if m is None:
            raise ValueError("m is required with a callable observation source")
    else:
        observations = np.asarray(observations, dtype=float)
        m = observations.shape[0]
    state = AvpvState(m)
    everyone = np.arange(m)
    first = np.zeros(m, dtype=np.int64)
    history = []
    for t in range(1, max_stages + 1):
        x = observations(t, everyone) if callable(observations) else observations[:, t - 1]
        if isinstance(prior, GaussianMixture):
            state.lfdr_avpv_update(everyone, x, 0.5, prior)
        else:
            state.msprt_update(everyone, x, prior)
        rej = bh_mask(state.p_running, alpha)
        first[rej & (first == 0)] = t
        dec = first > 0
        history.append(dec)
        if stopping is not None and stopping(t, dec):
            break
    return DecisionRecord(dec, first, t, history, m * t)
