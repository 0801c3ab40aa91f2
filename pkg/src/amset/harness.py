"""Monte Carlo scenarios comparing AMSET/MSET with always-valid p-value BH.

Each replication draws a ground truth and one ``m x stages`` observation
matrix; every method runs on that same matrix.  Streams are keyed by
(sweep point, replication, ...) under one master seed, so results do not
depend on the order or parallelism of execution.
"""
from __future__ import annotations

import csv
import hashlib
import io
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .avpv import PriorSpec, optimizely_run
from .estimate import FitOptions, FittedModel, fit_model
from .metrics import Confusion, aggregate
from .model import GaussianMixture, GroundTruth, TwoGroupsModel, assign_effects, sample_ground_truth, sample_matrix, stream
from .procedures import DecisionRecord, FirstRejection, ProcedureConfig, run

log = logging.getLogger(__name__)

THREADS_ENV = "AMSET_THREADS"

METHODS = ("AMSET_OR", "MSET_OR", "AMSET_DD", "MSET_DD", "Optimizely_OR", "Optimizely_DD", "AMSET_OR_SIMPLE")
DEFAULT_METHODS = METHODS[:6]

COLUMNS = ("scenario", "method", "sweep_param", "sweep_value", "stage", "fdr", "mfdr", "mdr", "power",
           "se_fdr", "se_mfdr", "se_mdr", "reps", "seed", "status")

# stream keys below the replication level
_TRUTH, _EFFECTS, _DATA = 0, 1, 2
_HISTORY = 2**32 - 1  # spawn keys must be non-negative; reps never reach this

UNIFORM_ATOMS = 50


@dataclass(frozen=True)
class AltSpec:
    """Alternative effect sizes: ``fixed`` mean, ``uniform`` on [lo, hi], or a ``mixture`` table."""

    kind: str
    mu: float = 2.0
    lo: float = 0.0
    hi: float = 0.0
    components: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform", "mixture"):
            raise ValueError(f"unknown alternative kind {self.kind!r}")
        if self.kind == "uniform" and not self.hi > self.lo:
            raise ValueError("uniform alternative needs hi > lo")
        if self.kind == "mixture":
            GaussianMixture.from_components(self.components)

    @classmethod
    def fixed(cls, mu: float) -> "AltSpec":
        return cls("fixed", mu=float(mu))

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "AltSpec":
        return cls("uniform", lo=float(lo), hi=float(hi))

    @classmethod
    def mixture(cls, components) -> "AltSpec":
        return cls("mixture", components=tuple((float(m), float(w)) for m, w in components))

    def density(self) -> GaussianMixture:
        """Marginal alternative density of one observation.

        A uniform effect is represented by equally weighted atoms at the
        midpoints of ``UNIFORM_ATOMS`` equal cells of [lo, hi].
        """
        if self.kind == "fixed":
            return GaussianMixture.point(self.mu)
        if self.kind == "uniform":
            edges = np.linspace(self.lo, self.hi, UNIFORM_ATOMS + 1)
            return GaussianMixture(0.5 * (edges[:-1] + edges[1:]))
        return GaussianMixture.from_components(self.components)

    def draw_means(self, k: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "fixed":
            return np.full(k, self.mu)
        if self.kind == "uniform":
            return rng.uniform(self.lo, self.hi, size=k)
        mus, ws = zip(*self.components)
        return np.asarray(mus)[rng.choice(len(mus), size=k, p=ws)]


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    m: int
    reps: int
    stages: int
    alpha: float
    truth_p: float
    alt: AltSpec
    methods: tuple[str, ...] = DEFAULT_METHODS
    seed: int = 2022
    sweep_param: str | None = None
    sweep_values: tuple[float, ...] = ()
    x_axis: str = "sweep"
    stopping: str = "fixed"
    historical_n: int = 10_000
    recovery: str = "data_driven"

    def __post_init__(self):
        if self.reps < 1 or self.stages < 1 or self.m < 1:
            raise ValueError("m, reps and stages must be positive")
        unknown = [mm for mm in self.methods if mm not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}")
        if self.sweep_param not in (None, "mu", "p"):
            raise ValueError(f"cannot sweep {self.sweep_param!r}")
        if self.sweep_param == "mu" and self.alt.kind != "fixed":
            raise ValueError("a mu sweep needs a fixed-mean alternative")
        if self.x_axis not in ("sweep", "stage"):
            raise ValueError("x_axis must be 'sweep' or 'stage'")
        if self.stopping not in ("fixed", "first_rejection"):
            raise ValueError("stopping must be 'fixed' or 'first_rejection'")

    def points(self) -> list[float | None]:
        return list(self.sweep_values) if self.sweep_param else [None]

    def at(self, value) -> "ScenarioConfig":
        """This scenario with the swept parameter set to ``value``."""
        if self.sweep_param == "mu":
            return replace(self, alt=AltSpec.fixed(value), sweep_param=None, sweep_values=())
        if self.sweep_param == "p":
            return replace(self, truth_p=float(value), sweep_param=None, sweep_values=())
        return self

    def oracle(self) -> TwoGroupsModel:
        return TwoGroupsModel(self.truth_p, self.alt.density())

    def desk(self, m: int = 2000, reps: int = 100) -> "ScenarioConfig":
        return replace(self, name=self.name + "-desk", m=m, reps=reps)


def _grid(lo: float, hi: float, step: float) -> tuple[float, ...]:
    n = int(round((hi - lo) / step))
    return tuple(round(lo + i * step, 10) for i in range(n + 1))


def builtin_scenarios() -> dict[str, ScenarioConfig]:
    """Paper-scale scenarios plus ``-desk`` twins (m=2000, reps=100)."""
    base = dict(m=5000, reps=500, alpha=0.05)
    paper = [
        ScenarioConfig("fixed1", stages=5, truth_p=0.05, alt=AltSpec.fixed(2.0),
                       sweep_param="mu", sweep_values=_grid(1.0, 3.0, 0.2), **base),
        ScenarioConfig("fixed2", stages=5, truth_p=0.05, alt=AltSpec.fixed(2.0),
                       sweep_param="p", sweep_values=_grid(0.01, 0.10, 0.01), **base),
        ScenarioConfig("fixed3", stages=5, truth_p=0.05, alt=AltSpec.uniform(2.0, 4.0),
                       sweep_param="p", sweep_values=_grid(0.02, 0.10, 0.01), **base),
        ScenarioConfig("stage1", stages=10, truth_p=0.05, alt=AltSpec.fixed(2.0), x_axis="stage", **base),
        ScenarioConfig("stage2", stages=10, truth_p=0.05, alt=AltSpec.uniform(1.0, 3.0), x_axis="stage", **base),
        ScenarioConfig("real1", stages=10, truth_p=0.03, alt=AltSpec.mixture([(1.61, 1.0)]),
                       x_axis="stage", **base),
        ScenarioConfig("real2", stages=10, truth_p=0.02, alt=AltSpec.mixture([(1.32, 0.5), (1.6, 0.5)]),
                       x_axis="stage", **base),
        ScenarioConfig("real3", stages=10, truth_p=0.04,
                       alt=AltSpec.mixture([(3.35, 0.25), (3.36, 0.25), (17.81, 0.25), (19.88, 0.25)]),
                       x_axis="stage", **base),
    ]
    out = {}
    for sc in paper:
        out[sc.name] = sc
        out[sc.name + "-desk"] = sc.desk()
    return out


def mixture_table(config: ScenarioConfig) -> list[tuple[float, float]]:
    """Effect-size table including the null atom, as (mu, proportion) rows."""
    alt = config.alt.density()
    return [(0.0, 1.0 - config.truth_p)] + [(mu, config.truth_p * w) for mu, w in alt.components]


@dataclass
class ResultRow:
    scenario: str
    method: str
    sweep_param: str
    sweep_value: str
    stage: str
    fdr: float
    mfdr: float
    mdr: float
    power: float
    se_fdr: float
    se_mfdr: float
    se_mdr: float
    reps: int
    seed: int
    status: str = "ok"

    def as_list(self) -> list:
        return [getattr(self, c) for c in COLUMNS]


@dataclass
class MethodContext:
    oracle: TwoGroupsModel
    fitted: FittedModel | None
    alpha: float
    stages: int
    stopping: Callable | None


def _procedure(adaptive: bool, source: str, thresholding: str = "compound"):
    def go(x: np.ndarray, ctx: MethodContext) -> DecisionRecord:
        model = ctx.oracle if source == "oracle" else ctx.fitted
        cfg = ProcedureConfig(ctx.alpha, adaptive, thresholding,
                              "oracle" if source == "oracle" else "data-driven", ctx.stages)
        return run(x, model.p, model.alt, cfg, ctx.stopping)
    return go


def _optimizely(kind: str):
    def go(x: np.ndarray, ctx: MethodContext) -> DecisionRecord:
        prior = PriorSpec.point(ctx.oracle.alt.mean) if kind == "oracle" else PriorSpec.normal(2.0)
        return optimizely_run(x, prior, ctx.alpha, ctx.stages, ctx.stopping)
    return go


REGISTRY: dict[str, Callable[[np.ndarray, MethodContext], DecisionRecord]] = {
    "AMSET_OR": _procedure(True, "oracle"),
    "MSET_OR": _procedure(False, "oracle"),
    "AMSET_DD": _procedure(True, "dd"),
    "MSET_DD": _procedure(False, "dd"),
    "Optimizely_OR": _optimizely("oracle"),
    "Optimizely_DD": _optimizely("dd"),
    "AMSET_OR_SIMPLE": _procedure(True, "oracle", "simple"),
}


def historical_sample(config: ScenarioConfig, n: int, seed: int, *key: int) -> np.ndarray:
    """Single-stage z-scores from independent experiments with the scenario's hyperparameters."""
    rng = stream(seed, *key)
    theta = rng.random(n) < config.truth_p
    mu = np.zeros(n)
    mu[theta] = config.alt.draw_means(int(theta.sum()), rng)
    return mu + rng.standard_normal(n)


def draw_replication(config: ScenarioConfig, point: int, rep: int) -> tuple[GroundTruth, np.ndarray]:
    """Ground truth (with per-coordinate effects) and the observation matrix."""
    seed = config.seed
    truth = sample_ground_truth(config.m, config.truth_p, stream(seed, point, rep, _TRUTH))
    rng = stream(seed, point, rep, _EFFECTS)
    means = np.zeros(config.m)
    nn = truth.nonnull
    means[nn] = config.alt.draw_means(int(nn.sum()), rng)
    truth = GroundTruth(truth.theta, means)
    x = sample_matrix(config.oracle(), truth, config.stages, seed, point, rep, _DATA)
    return truth, x


def _checksum(x: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(x).tobytes()).hexdigest()


@dataclass
class ReplicationResult:
    truth: GroundTruth
    records: dict[str, DecisionRecord]
    errors: dict[str, str] = field(default_factory=dict)
    checksum: str = ""


def run_replication(config: ScenarioConfig, point: int, rep: int, fitted: FittedModel | None,
                    methods: Sequence[str] | None = None) -> ReplicationResult:
    truth, x = draw_replication(config, point, rep)
    x.setflags(write=False)
    digest = _checksum(x)
    stopping = FirstRejection() if config.stopping == "first_rejection" else None
    ctx = MethodContext(config.oracle(), fitted, config.alpha, config.stages, stopping)
    out = ReplicationResult(truth, {}, checksum=digest)
    for name in methods or config.methods:
        if name.endswith("_DD") and name != "Optimizely_DD" and fitted is None:
            out.errors[name] = "no fitted model"
            continue
        try:
            out.records[name] = REGISTRY[name](x, ctx)
        except Exception as exc:  # one failing method must not sink the others
            log.exception("method %s failed", name)
            out.errors[name] = f"{type(exc).__name__}: {exc}"
        if _checksum(x) != digest:
            raise RuntimeError(f"method {name} altered the shared observations")
    return out


def thread_count(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def _rows_for(config: ScenarioConfig, name: str, sweep_value, reps: list[ReplicationResult]) -> list[ResultRow]:
    sp = config.sweep_param or ""
    sv = _fmt(sweep_value)
    failed = [r.errors[name] for r in reps if name in r.errors]
    if failed:
        nan = float("nan")
        stages = [str(t) for t in range(1, config.stages + 1)] if config.x_axis == "stage" else ["final"]
        return [ResultRow(config.name, name, sp, sv, st, nan, nan, nan, nan, nan, nan, nan,
                          len(reps), config.seed, "invalid: " + failed[0]) for st in stages]
    rows = []
    if config.x_axis == "stage":
        for t in range(1, config.stages + 1):
            conf = [Confusion.from_decisions(r.truth.theta, r.records[name].at(min(t, len(r.records[name].history))))
                    for r in reps]
            rows.append(_row(config, name, sp, sv, str(t), conf))
    else:
        conf = [Confusion.from_decisions(r.truth.theta, r.records[name].decisions) for r in reps]
        rows.append(_row(config, name, sp, sv, "final", conf))
    return rows


def _row(config, name, sp, sv, stage, conf) -> ResultRow:
    rep = aggregate(conf)
    return ResultRow(config.name, name, sp, sv, stage, rep.fdr, rep.mfdr, rep.mdr, rep.power,
                     rep.se_fdr, rep.se_mfdr, rep.se_mdr, rep.reps, config.seed)


def fit_for_point(config: ScenarioConfig, point: int) -> FittedModel:
    z = historical_sample(config, config.historical_n, config.seed, point, _HISTORY)
    return fit_model(z, FitOptions(recovery=config.recovery))


def simulate_point(config: ScenarioConfig, point: int, threads: int | None = None,
                   methods: Sequence[str] | None = None) -> tuple[list[ReplicationResult], FittedModel | None, str | None]:
    """All replications at one sweep point (``config`` already resolved with :meth:`ScenarioConfig.at`)."""
    methods = tuple(methods or config.methods)
    fitted, fit_error = None, None
    if any(mm in ("AMSET_DD", "MSET_DD") for mm in methods):
        try:
            fitted = fit_for_point(config, point)
        except Exception as exc:
            log.exception("estimation failed at sweep point %d", point)
            fit_error = f"{type(exc).__name__}: {exc}"
    n = thread_count(threads)
    job = lambda r: run_replication(config, point, r, fitted, methods)
    if n == 1:
        results = [job(r) for r in range(config.reps)]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(job, range(config.reps)))
    if fit_error:
        for r in results:
            for mm in ("AMSET_DD", "MSET_DD"):
                if mm in methods:
                    r.errors[mm] = "estimation failed: " + fit_error
    return results, fitted, fit_error


def run_scenario(config: ScenarioConfig, threads: int | None = None) -> list[ResultRow]:
    rows = []
    for point, value in enumerate(config.points()):
        cfg = config.at(value) if value is not None else config
        results, _, _ = simulate_point(cfg, point, threads)
        for name in config.methods:
            for row in _rows_for(cfg, name, value, results):
                row.scenario = config.name
                row.sweep_param = config.sweep_param or ""
                rows.append(row)
    return rows


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_cell(v) for v in r.as_list()])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(rows: Sequence[ResultRow], path) -> None:
    Path(path).write_text(rows_to_csv(rows))


def read_csv(path) -> list[ResultRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(ResultRow(
                rec["scenario"], rec["method"], rec["sweep_param"], rec["sweep_value"], rec["stage"],
                *(float(rec[k]) for k in ("fdr", "mfdr", "mdr", "power", "se_fdr", "se_mfdr", "se_mdr")),
                int(rec["reps"]), int(rec["seed"]), rec.get("status", "ok")))
    return rows


# ---------------------------------------------------------------- file inputs

class DataFormatError(ValueError):
    pass


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_matrix(path) -> np.ndarray:
    """``m x T`` z-score matrix from CSV; a non-numeric first row is a header."""
    with open(path, newline="") as fh:
        raw = [row for row in csv.reader(fh)]
    if raw and raw[0] and not all(_is_number(c.strip()) for c in raw[0] if c.strip()):
        raw, offset = raw[1:], 2
    else:
        offset = 1
    raw = [row for row in raw if any(c.strip() for c in row)]
    if not raw:
        raise DataFormatError(f"{path}: no data rows")
    width = len(raw[0])
    out = np.empty((len(raw), width))
    for r, row in enumerate(raw):
        if len(row) != width:
            raise DataFormatError(f"{path}: row {r + offset} has {len(row)} columns, expected {width}")
        for c, cell in enumerate(row):
            cell = cell.strip()
            if cell == "":
                raise DataFormatError(f"{path}: missing value at row {r + offset}, column {c + 1}")
            try:
                v = float(cell)
            except ValueError:
                raise DataFormatError(f"{path}: non-numeric value {cell!r} at row {r + offset}, column {c + 1}") from None
            if not np.isfinite(v):
                raise DataFormatError(f"{path}: non-finite value at row {r + offset}, column {c + 1}")
            out[r, c] = v
    return out


def read_z_column(path) -> np.ndarray:
    """Single column of z-scores, header optional."""
    x = read_matrix(path)
    if x.shape[1] != 1:
        raise DataFormatError(f"{path}: expected one column, found {x.shape[1]}")
    return x[:, 0]


def run_on_data(data, model, method: str = "AMSET", alpha: float = 0.05, stopping=None,
                max_stages: int | None = None) -> tuple[DecisionRecord, dict]:
    """Run one procedure on an observed ``m x T`` stream (array or CSV path).

    ``model`` supplies ``p`` and ``alt`` (a :class:`TwoGroupsModel` or a
    :class:`FittedModel`).  ``method`` is AMSET, MSET or AMSET_SIMPLE; no
    truth is known, so the summary holds decisions and stages only.
    """
    x = read_matrix(data) if isinstance(data, (str, Path)) else np.asarray(data, dtype=float)
    kinds = {"AMSET": (True, "compound"), "MSET": (False, "compound"), "AMSET_SIMPLE": (True, "simple")}
    key = method.upper().removesuffix("_OR").removesuffix("_DD")
    if key not in kinds:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(kinds)}")
    adaptive, thr = kinds[key]
    stages = max_stages or x.shape[1]
    source = "data-driven" if isinstance(model, FittedModel) else "oracle"
    rec = run(x, model.p, model.alt, ProcedureConfig(alpha, adaptive, thr, source, stages), stopping)
    summary = {
        "m": int(x.shape[0]),
        "stages_observed": int(x.shape[1]),
        "tau": rec.tau,
        "rejections": int(rec.decisions.sum()),
        "rejected": np.flatnonzero(rec.decisions).tolist(),
        "rejection_stage": rec.rejection_stage.tolist(),
        "samples_used": rec.samples_used,
    }
    return rec, summary


# ----------------------------------------------------------------- config files

def _load_toml(path):
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def config_from_dict(d: dict) -> ScenarioConfig:
    alt = d.get("alt", {"kind": "fixed", "mu": 2.0})
    kind = alt.get("kind", "fixed")
    if kind == "fixed":
        alt_spec = AltSpec.fixed(alt.get("mu", 2.0))
    elif kind == "uniform":
        alt_spec = AltSpec.uniform(alt["lo"], alt["hi"])
    else:
        alt_spec = AltSpec.mixture([tuple(c) for c in alt["components"]])
    sweep = d.get("sweep", {})
    est = d.get("estimation", {})
    kw = dict(
        name=d.get("name", "custom"), m=int(d["m"]), reps=int(d["reps"]), stages=int(d["stages"]),
        alpha=float(d.get("alpha", 0.05)), truth_p=float(d["p"]), alt=alt_spec,
        seed=int(d.get("seed", 2022)), x_axis=d.get("x_axis", "sweep"), stopping=d.get("stopping", "fixed"),
        historical_n=int(est.get("historical_n", 10_000)), recovery=est.get("recovery", "data_driven"),
    )
    if "methods" in d:
        kw["methods"] = tuple(d["methods"])
    if sweep:
        kw["sweep_param"] = sweep["param"]
        kw["sweep_values"] = tuple(float(v) for v in sweep["values"])
    return ScenarioConfig(**kw)


def load_config(path) -> ScenarioConfig:
    return config_from_dict(_load_toml(path))


def resolve_scenario(name_or_path: str, desk: bool = False) -> ScenarioConfig:
    catalog = builtin_scenarios()
    if name_or_path in catalog:
        sc = catalog[name_or_path]
        if desk and not sc.name.endswith("-desk"):
            sc = catalog[sc.name + "-desk"]
        return sc
    p = Path(name_or_path)
    if p.exists():
        sc = load_config(p)
        return sc.desk() if desk else sc
    raise KeyError(f"unknown scenario {name_or_path!r}")
