"""Empirical Bayes estimation of the non-null proportion and alternative density.

Pipeline: a Fourier-type estimate of the non-null proportion, a grid NPMLE
(Kiefer-Wolfowitz) of the mixing distribution of the z-scores by EM, then
recovery of the alternative as the non-null tail of the fitted mixture.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import LOG_SQRT_2PI, GaussianMixture

log = logging.getLogger(__name__)

MIN_SAMPLE = 100
PRUNE = 1e-8


class EstimationError(ValueError):
    pass


class NoAlternativeError(EstimationError):
    """Recovery left no component to serve as the alternative density."""


def _check_sample(z, min_n: int = MIN_SAMPLE) -> np.ndarray:
    z = np.asarray(z, dtype=float).ravel()
    if z.size < max(min_n, 1):
        raise EstimationError(f"need at least {min_n} observations, got {z.size}")
    if not np.all(np.isfinite(z)):
        raise EstimationError("observations must be finite")
    return z


def estimate_proportion(z, gamma: float = 0.5, n_t: int = 100, n_quad: int = 64) -> float:
    """Characteristic-function estimate of the non-null proportion.

    For ``t`` on a grid in ``(0, gamma*sqrt(2 log n)]``::

        p(t) = 1 - mean_j kappa(t, z_j)
        kappa(t, x) = int_{-1}^{1} (1 - |s|) cos(t s x) exp(t^2 s^2 / 2) ds

    and the estimate is ``max_t p(t)`` clipped to ``[0, 1)``.  Under N(0,1)
    data ``E kappa(t, z) = 1``, so ``p(t)`` is unbiased for the null-free
    mass of the components it resolves.
    """
    z = np.sort(_check_sample(z))  # sorted: summation order independent of input order
    n = z.size
    tmax = gamma * np.sqrt(2.0 * np.log(n))
    ts = tmax * np.arange(1, n_t + 1) / n_t
    # the integrand is even in s with a kink at 0: integrate over [0, 1] and double
    nodes, wts = np.polynomial.legendre.leggauss(n_quad)
    s = 0.5 * (nodes + 1.0)
    ws = 0.5 * wts * (1.0 - s)
    best = -np.inf
    for t in ts:
        mean_cos = np.cos(np.outer(t * s, z)).mean(axis=1)
        kappa = 2.0 * np.dot(ws * np.exp(0.5 * (t * s) ** 2), mean_cos)
        best = max(best, 1.0 - kappa)
    return float(np.clip(best, 0.0, np.nextafter(1.0, 0.0)))


@dataclass
class DeconvolutionResult:
    grid_means: np.ndarray
    weights: np.ndarray
    loglik: float
    iterations: int
    converged: bool = True
    history: list[float] = field(default_factory=list, repr=False)
    # size of the log-likelihood drop of a rejected final EM step (0 if none)
    stall_drop: float = 0.0

    @property
    def components(self) -> list[tuple[float, float]]:
        return list(zip(self.grid_means.tolist(), self.weights.tolist()))

    def mixture(self) -> GaussianMixture:
        return GaussianMixture(self.grid_means, self.weights)


def default_grid(z, n_points: int = 300) -> tuple[float, float, int]:
    z = np.asarray(z, dtype=float)
    return float(z.min() - 1.0), float(z.max() + 1.0), n_points


def _interior_point(L: np.ndarray, c: np.ndarray, tol: float = 1e-10, max_iter: int = 200) -> np.ndarray:
    """Primal-dual interior point for ``min -sum c_i log (L w)_i + sum w`` over ``w >= 0``.

    ``c`` sums to one.  At the optimum ``sum w = 1``, so this is the simplex
    NPMLE without an equality constraint.  Each Newton step solves a
    ``K x K`` system.
    """
    k = L.shape[1]
    w = np.full(k, 1.0 / k)
    z = np.ones(k)
    for _ in range(max_iter):
        g = L @ w
        grad = 1.0 - L.T @ (c / g)
        gap = w @ z / k
        if gap < tol and np.max(np.abs(grad - z)) < tol:
            break
        tau = 0.1 * gap
        H = (L * (c / (g * g))[:, None]).T @ L
        H[np.diag_indices(k)] += z / w
        dw = np.linalg.solve(H, tau / w - grad)
        dz = tau / w - z - (z / w) * dw
        step = 1.0
        for v, d in ((w, dw), (z, dz)):
            neg = d < 0
            if neg.any():
                step = min(step, 0.99 * float(np.min(-v[neg] / d[neg])))
        w = w + step * dw
        z = z + step * dz
    return w / w.sum()


def npmle_deconvolve(z, grid: tuple[float, float, int] | None = None, tol: float = 1e-8,
                     max_iter: int = 5000, init=None, solver: str = "em",
                     bins: int | None = 2000, min_n: int = MIN_SAMPLE) -> DeconvolutionResult:
    """Grid NPMLE of a N(mu, 1) location mixture.

    Maximizes ``sum_i log sum_k w_k phi(z_i - mu_k)`` over simplex weights on
    a fixed grid of means.  The EM fixed point

        w_k <- w_k * mean_i phi(z_i - mu_k) / f_w(z_i)

    is iterated from ``init`` (uniform by default) until the relative
    log-likelihood gain drops below ``tol``.  ``history`` holds the
    log-likelihood of every accepted iterate and never decreases.

    EM stops well short of the sparse optimum, leaving a smooth estimate of
    the mixing distribution.  ``solver="interior"`` instead starts EM from an
    interior-point solution, which lands on the sparse optimum.

    Samples larger than ``bins`` are replaced by equal-width bin midpoints
    with counts (``bins=None`` keeps every observation).  Weights below
    1e-8 are dropped from the returned support.  ``min_n`` lowers the
    sample-size floor for small exact checks.
    """
    z = _check_sample(z, min_n)
    lo, hi, k = grid if grid is not None else default_grid(z)
    mu = np.linspace(lo, hi, int(k))
    if np.any(np.diff(mu) <= 0):
        raise EstimationError("grid must be strictly ascending")
    if solver not in ("interior", "em"):
        raise ValueError(f"unknown solver {solver!r}")
    n = z.size
    if bins is not None and n > bins:
        counts, edges = np.histogram(z, bins=bins)
        nz = counts > 0
        x = 0.5 * (edges[:-1] + edges[1:])[nz]
        c = counts[nz].astype(float)
    else:
        x = np.sort(z)
        c = np.ones(n)
    L = np.exp(-0.5 * (x[:, None] - mu[None, :]) ** 2 - LOG_SQRT_2PI)
    # guard the log against points far outside the grid
    L = np.maximum(L, np.finfo(float).tiny)
    Lt = np.ascontiguousarray(L.T)

    if solver == "interior":
        w = _interior_point(L, c / n)
    elif init is None:
        w = np.full(mu.size, 1.0 / mu.size)
    else:
        w = np.asarray(init, dtype=float)
        w = w / w.sum()
    f = L @ w
    ll = float(np.dot(c, np.log(f)))
    history = [ll]
    converged = False
    stall = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        w_new = w * (Lt @ (c / f)) / n
        w_new /= w_new.sum()
        f_new = L @ w_new
        new = float(np.dot(c, np.log(f_new)))
        if new < ll:
            # EM cannot lose likelihood; a drop here is rounding at the fixed point
            stall = ll - new
            converged = True
            break
        history.append(new)
        gain = new - ll
        w, f, ll = w_new, f_new, new
        if gain < tol * abs(ll):
            converged = True
            break
    if not converged:
        log.warning("NPMLE did not converge in %d iterations", max_iter)
    keep = w >= PRUNE
    wk = w[keep] / w[keep].sum()
    return DeconvolutionResult(mu[keep], wk, ll, it, converged, history, stall)


def recover_alternative(deconv: DeconvolutionResult, p_hat: float, method="data_driven",
                        inclusive: bool = False) -> GaussianMixture:
    """Alternative density from a fitted mixture.

    ``method`` is ``"data_driven"`` or ``("hard", c)``.  Hard thresholding
    keeps components with ``|mu| >= c``.  The data-driven rule orders
    components by ``|mu|``, finds the largest ``k_a`` whose cumulative weight
    is at most ``1 - p_hat`` and keeps the components after it (from it on
    when ``inclusive``); no such ``k_a`` is an error.  Kept weights are
    renormalized.
    """
    mu = np.asarray(deconv.grid_means, dtype=float)
    w = np.asarray(deconv.weights, dtype=float)
    if isinstance(method, str) and method.startswith("hard"):
        method = parse_recovery(method)
    if isinstance(method, tuple):
        kind, c = method
        if kind != "hard":
            raise ValueError(f"unknown recovery method {method!r}")
        keep = np.abs(mu) >= c
    elif method == "data_driven":
        if not 0.0 < p_hat < 1.0:
            raise NoAlternativeError(f"data-driven recovery needs p_hat in (0, 1), got {p_hat}")
        order = np.lexsort((mu, np.abs(mu)))
        cum = np.cumsum(w[order])
        k_a = int(np.sum(cum <= 1.0 - p_hat + 1e-12))
        if k_a == 0:
            # the max over an empty set: not even the most null-like component fits
            raise NoAlternativeError("no split of the fitted mixture leaves 1 - p_hat to the null")
        start = max(k_a - 1, 0) if inclusive else k_a
        keep = np.zeros(mu.size, dtype=bool)
        keep[order[start:]] = True
    else:
        raise ValueError(f"unknown recovery method {method!r}")
    if not keep.any() or w[keep].sum() <= 0:
        raise NoAlternativeError("no detectable alternative component")
    wk = w[keep] / w[keep].sum()
    return GaussianMixture(mu[keep], wk / wk.sum())


def parse_recovery(spec: str):
    """``"data_driven"`` or ``"hard:c"`` -> recovery method argument."""
    if spec == "data_driven":
        return spec
    if spec.startswith("hard"):
        _, _, c = spec.partition(":")
        return ("hard", float(c) if c else 1.0)
    raise ValueError(f"unknown recovery method {spec!r}")


@dataclass
class FitOptions:
    gamma: float = 0.5
    grid_points: int = 300
    tol: float = 1e-8
    max_iter: int = 5000
    solver: str = "em"
    bins: int | None = 2000
    recovery: str = "data_driven"
    inclusive: bool = False


@dataclass
class FittedModel:
    p_hat: float
    f1_hat: GaussianMixture
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.p_hat < 1.0:
            raise ValueError("p_hat must lie in [0, 1)")

    # lets a fitted model stand in for the true one when driving procedures
    @property
    def p(self) -> float:
        return self.p_hat

    @property
    def alt(self) -> GaussianMixture:
        return self.f1_hat

    def to_dict(self) -> dict:
        return {
            "p_hat": self.p_hat,
            "means": list(self.f1_hat.means),
            "weights": list(self.f1_hat.weights),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedModel":
        return cls(float(d["p_hat"]), GaussianMixture(d["means"], d["weights"]), d.get("provenance", {}))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "FittedModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_model(z, options: FitOptions | None = None) -> FittedModel:
    """Proportion estimate, NPMLE and alternative recovery in one call.

    Falls back to hard thresholding at ``|mu| >= 1`` when the configured
    recovery finds no alternative; the fallback is noted in the provenance.
    """
    opts = options or FitOptions()
    z = _check_sample(z)
    p_hat = estimate_proportion(z, gamma=opts.gamma)
    grid = default_grid(z, opts.grid_points)
    deconv = npmle_deconvolve(z, grid, tol=opts.tol, max_iter=opts.max_iter,
                              solver=opts.solver, bins=opts.bins)
    prov = {
        "n": int(z.size),
        "grid": list(grid),
        "recovery": opts.recovery,
        "npmle_iterations": deconv.iterations,
        "npmle_converged": deconv.converged,
        "fallback": False,
    }
    try:
        f1 = recover_alternative(deconv, p_hat, parse_recovery(opts.recovery), opts.inclusive)
    except NoAlternativeError as exc:
        log.info("recovery failed (%s); falling back to hard threshold 1", exc)
        prov["fallback"] = True
        prov["fallback_reason"] = str(exc)
        f1 = recover_alternative(deconv, p_hat, ("hard", 1.0))
    return FittedModel(p_hat, f1, prov)

