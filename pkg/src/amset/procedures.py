"""Multistage lfdr-thresholding procedures (AMSET, MSET) and the Bayes rule.

AMSET keeps an active set: at each stage the active coordinates are ranked
by lfdr, the compound threshold picks the largest prefix whose mean lfdr is
at most ``alpha``, and the rejected coordinates leave the active set for
good.  MSET samples every coordinate at every stage and re-thresholds from
scratch, so its decisions can change between stages.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .lfdr import LfdrState


@dataclass(frozen=True)
class ProcedureConfig:
    alpha: float = 0.05
    adaptive: bool = True
    thresholding: str = "compound"
    statistic_source: str = "oracle"
    max_stages: int = 5

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.max_stages < 1:
            raise ValueError("max_stages must be at least 1")
        if self.thresholding not in ("compound", "simple"):
            raise ValueError(f"unknown thresholding {self.thresholding!r}")
        if self.statistic_source not in ("oracle", "data-driven"):
            raise ValueError(f"unknown statistic source {self.statistic_source!r}")


def compound_threshold(stats, alpha: float) -> tuple[int, float | None]:
    """Largest ``r`` with mean of the ``r`` smallest stats ``<= alpha``.

    Returns ``(r, cutoff)`` where ``cutoff`` is the r-th smallest value, or
    ``(0, None)`` when not even the smallest statistic qualifies.
    """
    s = np.sort(np.asarray(stats, dtype=float), kind="stable")
    if s.size == 0:
        raise ValueError("compound threshold needs at least one statistic")
    # prefix mean <= alpha  <=>  prefix sum of (s - alpha) <= 0; exact at ties
    ok = np.flatnonzero(np.cumsum(s - alpha) <= 0.0)
    if ok.size == 0:
        return 0, None
    r = int(ok[-1]) + 1
    return r, float(s[r - 1])


def compound_mask(stats, alpha: float) -> np.ndarray:
    """Boolean rejection mask: every statistic at or below the cutoff."""
    stats = np.asarray(stats, dtype=float)
    if stats.size == 0:
        return np.zeros(0, dtype=bool)
    r, cutoff = compound_threshold(stats, alpha)
    if r == 0:
        return np.zeros(stats.shape, dtype=bool)
    return stats <= cutoff


def simple_mask(stats, alpha: float) -> np.ndarray:
    return np.asarray(stats, dtype=float) <= alpha


def simple_threshold(stats, alpha: float) -> set[int]:
    """Positions whose statistic is at most ``alpha``."""
    return set(np.flatnonzero(simple_mask(stats, alpha)).tolist())


def threshold_mask(stats, config: ProcedureConfig) -> np.ndarray:
    if config.thresholding == "simple":
        return simple_mask(stats, config.alpha)
    return compound_mask(stats, config.alpha)


@dataclass
class ProcedureState:
    """Active set and rejection stages for an adaptive run.

    ``rejection_stage[i]`` is the 1-based stage at which ``i`` was rejected,
    0 while it is still active.
    """

    m: int
    t: int = 1
    active: np.ndarray = field(default=None)
    rejection_stage: np.ndarray = field(default=None)
    last_rejected: np.ndarray = field(default=None)
    last_r: int = 0

    def __post_init__(self):
        if self.active is None:
            self.active = np.ones(self.m, dtype=bool)
        if self.rejection_stage is None:
            self.rejection_stage = np.zeros(self.m, dtype=np.int64)
        if self.last_rejected is None:
            self.last_rejected = np.zeros(0, dtype=np.intp)

    @property
    def active_idx(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    @property
    def decisions(self) -> np.ndarray:
        return self.rejection_stage > 0


def amset_step(state: ProcedureState, stage_stats, config: ProcedureConfig) -> ProcedureState:
    """Threshold the active coordinates' stats and retire the rejected ones.

    ``stage_stats`` is either a mapping ``coordinate -> lfdr`` whose keys are
    exactly the active set, or an array aligned with ``state.active_idx``.
    """
    idx = state.active_idx
    if isinstance(stage_stats, Mapping):
        if set(stage_stats) != set(idx.tolist()):
            raise ValueError("stage statistics must be keyed exactly by the active set")
        stats = np.array([stage_stats[i] for i in idx.tolist()], dtype=float)
    else:
        stats = np.asarray(stage_stats, dtype=float)
        if stats.shape != idx.shape:
            raise ValueError("stage statistics do not match the active set size")
    mask = threshold_mask(stats, config) if stats.size else np.zeros(0, dtype=bool)
    rejected = idx[mask]
    state.active[rejected] = False
    state.rejection_stage[rejected] = state.t
    state.last_rejected = rejected
    state.last_r = int(mask.sum())
    state.t += 1
    return state


def mset_step(stage_stats, config: ProcedureConfig) -> np.ndarray:
    """Stage decisions over all coordinates; no memory of earlier stages."""
    stats = np.asarray(stage_stats, dtype=float)
    return threshold_mask(stats, config)


@dataclass
class DecisionRecord:
    """Outcome of a run.

    ``decisions`` are the decisions at the stopping stage ``tau``;
    ``history[t-1]`` holds the decisions reported at stage ``t``.
    ``rejection_stage`` is the first stage a coordinate was rejected (0 if
    never); for adaptive runs ``decisions == (0 < rejection_stage <= tau)``.
    """

    decisions: np.ndarray
    rejection_stage: np.ndarray
    tau: int
    history: list[np.ndarray] = field(default_factory=list)
    samples_used: int = 0

    @property
    def ever_rejected(self) -> np.ndarray:
        return self.rejection_stage > 0

    def at(self, t: int) -> np.ndarray:
        return self.history[t - 1]


# stopping rules: called after each stage as rule(t, decisions_at_t)

class FixedHorizon:
    def __init__(self, horizon: int):
        self.horizon = horizon

    def __call__(self, t: int, decisions: np.ndarray) -> bool:
        return t >= self.horizon


class FirstRejection:
    """Stop at the first stage that reports at least one rejection."""

    def __call__(self, t: int, decisions: np.ndarray) -> bool:
        return bool(decisions.any())


class StopAt:
    def __init__(self, stage: int):
        self.stage = stage

    def __call__(self, t: int, decisions: np.ndarray) -> bool:
        return t >= self.stage


def _observe(observations, t: int, idx: np.ndarray) -> np.ndarray:
    if callable(observations):
        return np.asarray(observations(t, idx), dtype=float)
    return observations[idx, t - 1]


def run(observations, p: float, alt, config: ProcedureConfig,
        stopping: Callable[[int, np.ndarray], bool] | None = None,
        m: int | None = None) -> DecisionRecord:
    """Run AMSET or MSET on a stream of observations.

    ``observations`` is an ``m x T`` array (column ``t-1`` is stage ``t``)
    or a callable ``(t, idx) -> values`` for coordinates ``idx``.  ``p`` and
    ``alt`` parameterize the lfdr statistic: true values give the oracle
    statistic, fitted values the data-driven one.  The run ends at
    ``config.max_stages``, when ``stopping`` fires, or (adaptive) when the
    active set is empty.
    """
    if callable(observations):
        if m is None:
            raise ValueError("m is required with a callable observation source")
    else:
        observations = np.asarray(observations, dtype=float)
        m = observations.shape[0]
        if observations.shape[1] < config.max_stages:
            raise ValueError("fewer observed stages than max_stages")
    lf = LfdrState(m, alt)
    history = []
    used = 0
    if config.adaptive:
        state = ProcedureState(m)
        for t in range(1, config.max_stages + 1):
            idx = state.active_idx
            lf.update(idx, _observe(observations, t, idx))
            used += idx.size
            amset_step(state, lf.values(idx, p), config)
            dec = state.decisions.copy()
            history.append(dec)
            if (stopping is not None and stopping(t, dec)) or not state.active.any():
                break
        return DecisionRecord(dec, state.rejection_stage.copy(), t, history, used)

    everyone = np.arange(m)
    first = np.zeros(m, dtype=np.int64)
    for t in range(1, config.max_stages + 1):
        lf.update(everyone, _observe(observations, t, everyone))
        used += m
        dec = mset_step(lf.values(everyone, p), config)
        first[dec & (first == 0)] = t
        history.append(dec)
        if stopping is not None and stopping(t, dec):
            break
    return DecisionRecord(dec, first, t, history, used)


def bayes_threshold(lam: float, alpha: float) -> float:
    """lfdr cutoff ``(1 + alpha*lam) / (1 + lam)`` minimizing the weighted risk."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return (1.0 + alpha * lam) / (1.0 + lam)


def weighted_loss(theta, decisions, lam: float, alpha: float) -> float:
    """Mean of ``lam*(1-theta)*delta + theta*(1-delta) - alpha*lam*delta``."""
    theta = np.asarray(theta, dtype=float)
    delta = np.asarray(decisions, dtype=float)
    if theta.shape != delta.shape:
        raise ValueError("truth and decisions differ in length")
    terms = lam * (1 - theta) * delta + theta * (1 - delta) - alpha * lam * delta
    return float(terms.sum() / theta.size)
