"""Sequential local false discovery rate statistics.

The lfdr of coordinate ``i`` after ``T`` stages is

    (1-p) prod f0(x_it) / [(1-p) prod f0(x_it) + p prod f1(x_it)]

kept here as running log-likelihood sums.  The same state serves the oracle
statistic (true ``p``, ``f1``) and the data-driven one (fitted ``p``, ``f1``).
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from .model import CLAMP, GaussianMixture, TwoGroupsModel, mixture_log_pdf, standard_normal_log_pdf


class LfdrState:
    """Per-coordinate cumulative log-likelihoods under the null and ``f1``."""

    def __init__(self, m: int, alt: GaussianMixture | TwoGroupsModel):
        if isinstance(alt, TwoGroupsModel):
            alt = alt.alt
        self.alt = alt
        self.cum_log_null = np.zeros(m)
        self.cum_log_alt = np.zeros(m)
        self.n_obs = np.zeros(m, dtype=np.int64)
        self.clamped = 0

    @property
    def m(self) -> int:
        return self.n_obs.size

    def update(self, i, x) -> "LfdrState":
        """Add observation(s) ``x`` for coordinate(s) ``i``.

        ``i`` must not repeat within one call.
        """
        i = np.atleast_1d(np.asarray(i, dtype=np.intp))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if i.shape != x.shape:
            raise ValueError("indices and observations differ in shape")
        if not np.all(np.isfinite(x)):
            raise ValueError("observations must be finite")
        big = np.abs(x) > CLAMP
        if big.any():
            self.clamped += int(big.sum())
            x = np.clip(x, -CLAMP, CLAMP)
        self.cum_log_null[i] += standard_normal_log_pdf(x)
        self.cum_log_alt[i] += mixture_log_pdf(self.alt, x)
        self.n_obs[i] += 1
        return self

    def log_ratio(self, i=None) -> np.ndarray:
        """``log prod f1 - log prod f0`` for coordinates ``i`` (all if None)."""
        if i is None:
            return self.cum_log_alt - self.cum_log_null
        return self.cum_log_alt[i] - self.cum_log_null[i]

    def values(self, idx, p: float) -> np.ndarray:
        """lfdr for the coordinates in ``idx`` as an array."""
        idx = np.asarray(idx, dtype=np.intp)
        if np.any(self.n_obs[idx] == 0):
            raise ValueError("lfdr requested for a coordinate with no observations")
        return lfdr_from_log_ratio(self.log_ratio(idx), p)

    def lfdr_value(self, i: int, p: float) -> float:
        if self.n_obs[i] == 0:
            raise ValueError(f"coordinate {i} has no observations yet")
        return float(lfdr_from_log_ratio(self.log_ratio(i), p))

    def batch_lfdr(self, active, p: float) -> dict[int, float]:
        idx = np.asarray(sorted(active), dtype=np.intp)
        return dict(zip(idx.tolist(), self.values(idx, p).tolist()))


def lfdr_from_log_ratio(log_ratio, p: float):
    """``1 / (1 + p/(1-p) * exp(log_ratio))`` evaluated without overflow.

    ``p = 0`` gives lfdr 1 (no prior mass on the alternative).
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"proportion must lie in [0, 1), got {p}")
    if p == 0.0:
        return np.ones_like(np.asarray(log_ratio, dtype=float))[()]
    log_odds = np.log(p) - np.log1p(-p) + np.asarray(log_ratio, dtype=float)
    return expit(-log_odds)


def update(state: LfdrState, i, x, model=None) -> LfdrState:
    """Functional alias of :meth:`LfdrState.update`; ``model`` is ignored
    beyond a consistency check since the state owns its alternative."""
    if model is not None:
        alt = model.alt if isinstance(model, TwoGroupsModel) else model
        if alt != state.alt:
            raise ValueError("state was built for a different alternative density")
    return state.update(i, x)


def lfdr_value(state: LfdrState, i: int, p: float) -> float:
    return state.lfdr_value(i, p)


def batch_lfdr(state: LfdrState, active, p: float) -> dict[int, float]:
    return state.batch_lfdr(active, p)
