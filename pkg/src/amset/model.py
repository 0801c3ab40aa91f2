"""Two-groups data model: unit-variance Gaussian densities, mixtures, sampling.

Every coordinate ``i`` carries a latent label ``theta_i``.  Null coordinates
emit N(0, 1) draws at each stage; non-null coordinates emit draws from the
alternative, a finite mixture of unit-variance normals.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

# observations beyond this magnitude are clamped before density evaluation
CLAMP = 40.0


def standard_normal_log_pdf(x):
    """Log density of N(0, 1); works elementwise on arrays."""
    x = np.asarray(x, dtype=float)
    out = -0.5 * x * x - LOG_SQRT_2PI
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class GaussianMixture:
    """Finite mixture of N(mean_k, 1) components."""

    means: tuple[float, ...]
    weights: tuple[float, ...]

    def __init__(self, means: Iterable[float], weights: Iterable[float] | None = None):
        means = tuple(float(m) for m in means)
        if not means:
            raise ValueError("mixture needs at least one component")
        if weights is None:
            weights = (1.0 / len(means),) * len(means)
        weights = tuple(float(w) for w in weights)
        if len(weights) != len(means):
            raise ValueError("means and weights differ in length")
        if any(not np.isfinite(m) for m in means):
            raise ValueError("component means must be finite")
        if any(w < 0 for w in weights):
            raise ValueError("weights must be nonnegative")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {sum(weights)!r}, not 1")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_components(cls, components: Sequence[tuple[float, float]]) -> "GaussianMixture":
        """Build from ``(mean, weight)`` pairs."""
        return cls([c[0] for c in components], [c[1] for c in components])

    @classmethod
    def point(cls, mean: float) -> "GaussianMixture":
        return cls([mean], [1.0])

    @property
    def components(self) -> list[tuple[float, float]]:
        return list(zip(self.means, self.weights))

    @property
    def mean(self) -> float:
        return float(np.dot(self.means, self.weights))

    def __len__(self) -> int:
        return len(self.means)

    def log_pdf(self, x):
        return mixture_log_pdf(self, x)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(len(self.means), size=size, p=self.weights)
        return np.asarray(self.means)[idx] + rng.standard_normal(size)


def mixture_log_pdf(gm: GaussianMixture, x):
    """``log sum_k w_k phi(x - mu_k)`` by log-sum-exp over the components."""
    x = np.asarray(x, dtype=float)
    mu = np.asarray(gm.means)
    w = np.asarray(gm.weights)
    if len(mu) == 1:
        out = standard_normal_log_pdf(x - mu[0])
        return out
    d = x[..., None] - mu
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    out = logsumexp(logw - 0.5 * d * d, axis=-1) - LOG_SQRT_2PI
    return out[()] if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TwoGroupsModel:
    """Non-null proportion ``p`` with a N(0,1) null and mixture alternative."""

    p: float
    alt: GaussianMixture

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"non-null proportion must lie in (0, 1), got {self.p}")
        if not isinstance(self.alt, GaussianMixture):
            raise TypeError("alt must be a GaussianMixture")


@dataclass(frozen=True)
class GroundTruth:
    """Latent labels, optionally with a fixed effect size per coordinate.

    When ``means`` is given, non-null coordinate ``i`` draws N(means[i], 1) at
    every stage; otherwise each draw picks a fresh alternative component.
    """

    theta: np.ndarray
    means: np.ndarray | None = field(default=None)

    def __post_init__(self):
        theta = np.asarray(self.theta)
        if theta.ndim != 1 or theta.size == 0:
            raise ValueError("theta must be a nonempty vector")
        if not np.all((theta == 0) | (theta == 1)):
            raise ValueError("theta entries must be 0 or 1")
        object.__setattr__(self, "theta", theta.astype(np.int8))
        if self.means is not None:
            means = np.asarray(self.means, dtype=float)
            if means.shape != theta.shape:
                raise ValueError("means must match theta in shape")
            object.__setattr__(self, "means", means)

    @property
    def m(self) -> int:
        return self.theta.size

    @property
    def nonnull(self) -> np.ndarray:
        return self.theta.astype(bool)


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``key`` under a master ``seed``.

    Streams are derived with ``SeedSequence(seed, spawn_key=key)``, so
    ``stream(s, rep, stage)`` is the same regardless of which other streams
    were created first.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def sample_ground_truth(m: int, p: float, rng: np.random.Generator) -> GroundTruth:
    if m < 1:
        raise ValueError("m must be at least 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be a probability")
    return GroundTruth((rng.random(m) < p).astype(np.int8))


def assign_effects(truth: GroundTruth, alt: GaussianMixture, rng: np.random.Generator) -> GroundTruth:
    """Fix one alternative mean per non-null coordinate (drawn by weight)."""
    means = np.zeros(truth.m)
    nn = truth.nonnull
    k = int(nn.sum())
    if k:
        idx = rng.choice(len(alt), size=k, p=alt.weights)
        means[nn] = np.asarray(alt.means)[idx]
    return GroundTruth(truth.theta, means)


def sample_stage(model: TwoGroupsModel, truth: GroundTruth, active, rng: np.random.Generator) -> dict[int, float]:
    """One observation for each active coordinate, keyed by coordinate."""
    idx = np.asarray(sorted(active), dtype=np.intp)
    values = sample_active(model, truth, idx, rng)
    return dict(zip(idx.tolist(), values.tolist()))


def sample_active(model: TwoGroupsModel, truth: GroundTruth, idx: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Array form of :func:`sample_stage` for coordinates ``idx`` (in order)."""
    idx = np.asarray(idx, dtype=np.intp)
    x = rng.standard_normal(idx.size)
    if idx.size == 0:
        return x
    nn = truth.nonnull[idx]
    if truth.means is not None:
        x += truth.means[idx]
    elif nn.any():
        comp = rng.choice(len(model.alt), size=int(nn.sum()), p=model.alt.weights)
        x[nn] += np.asarray(model.alt.means)[comp]
    return x


def sample_matrix(model: TwoGroupsModel, truth: GroundTruth, stages: int, seed: int, *key: int) -> np.ndarray:
    """Full ``m x stages`` observation matrix; stage ``t`` uses stream ``(*key, t)``."""
    everyone = np.arange(truth.m)
    cols = [sample_active(model, truth, everyone, stream(seed, *key, t)) for t in range(stages)]
    return np.column_stack(cols) if cols else np.empty((truth.m, 0))
