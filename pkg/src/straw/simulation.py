"""Monte Carlo harness for the 1-d, 2-d and 3-d block-sparsity scenarios."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .lattice import Lattice
from .procedures import GridSpec, bh_procedure, select_k, straw_stepup
from .sparsity import KernelSpec, estimate_sparsity
from .weighting import DEFAULT_CLIP, clamp_sparsity, weighted_pvalues

METHODS = ("BH", "LAWS.or", "LAWS.dd", "STRAW.or", "STRAW.dd")
BACKGROUND = 0.01

MU_SWEEP = (1.5, 1.6, 1.7, 1.8, 1.9, 2.0)
PI_SWEEP = (0.4, 0.45, 0.5, 0.55, 0.6)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    extents: tuple[int, ...]
    signal_level: float = 0.6
    mu: float = 2.0
    alpha: float = 0.1
    methods: tuple[str, ...] = METHODS
    reps: int = 100
    seed: int = 0
    grid: GridSpec = field(default_factory=GridSpec)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    xi: float = DEFAULT_CLIP
    background: float = BACKGROUND
    sweep: str = "mu"
    """Which parameter the named scenario varies: ``"mu"`` or ``"pi"``."""

    @property
    def lattice(self) -> Lattice:
        return Lattice(self.extents)

    @property
    def param_label(self) -> str:
        return f"mu={self.mu:g};pi={self.signal_level:g}"


# name -> (extents, swept parameter)
SCENARIOS = {
    "s1": ((5000,), "mu"),
    "s2": ((5000,), "pi"),
    "s3": ((80, 80), "mu"),
    "s4": ((80, 80), "pi"),
    "s5": ((20, 20, 25), "mu"),
    "s6": ((20, 20, 25), "pi"),
    "null": ((5000,), "mu"),
}


def scenario(name: str, **overrides) -> ScenarioConfig:
    """Named scenario with its fixed layout constants; keyword overrides replace fields."""
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; expected one of {sorted(SCENARIOS)}")
    extents, sweep = SCENARIOS[name]
    cfg = ScenarioConfig(name=name, extents=extents, sweep=sweep)
    if name == "null":
        cfg = replace(cfg, mu=0.0, signal_level=0.0, background=0.0)
    return replace(cfg, **overrides)


def _signal_mask(cfg: ScenarioConfig) -> np.ndarray:
    lat = cfg.lattice
    coords = lat.coords()
    if cfg.name in ("s1", "s2"):
        s = coords[:, 0]
        return np.isin((s - 1) // 1000, [1, 2, 3, 4]) & ((s - 1) % 1000 < 200)
    if cfg.name in ("s3", "s4"):
        x, y = coords[:, 0], coords[:, 1]
        square = (51 <= x) & (x <= 65) & (51 <= y) & (y <= 65)
        disk = (x - 20) ** 2 + (y - 20) ** 2 <= 100
        return square | disk
    if cfg.name in ("s5", "s6"):
        x, y, z = coords.T
        return (6 <= x) & (x <= 15) & (11 <= y) & (y <= 20) & (11 <= z) & (z <= 20)
    return np.zeros(lat.size, dtype=bool)


def build_sparsity_layout(cfg: ScenarioConfig) -> np.ndarray:
    """True local sparsity: ``signal_level`` on the signal regions, background elsewhere."""
    return np.where(_signal_mask(cfg), cfg.signal_level, cfg.background)


def simulate_replication(cfg: ScenarioConfig, seed: int, pi1=None):
    """Draw states and two-sided p-values: ``theta ~ Bern(pi1)``,
    ``X ~ N(mu * theta, 1)``, ``p = 2 (1 - Phi(|X|))``."""
    if pi1 is None:
        pi1 = build_sparsity_layout(cfg)
    rng = np.random.default_rng(seed)
    theta = rng.random(pi1.size) < pi1
    x = rng.standard_normal(pi1.size) + cfg.mu * theta
    p = 2.0 * stats.norm.sf(np.abs(x))
    return theta, p


def compute_fdp(theta, decisions) -> float:
    theta = np.asarray(theta, dtype=bool)
    decisions = np.asarray(decisions, dtype=bool)
    false = np.count_nonzero(decisions & ~theta)
    return false / max(int(decisions.sum()), 1)


def compute_tp(theta, decisions) -> int:
    return int(np.count_nonzero(np.asarray(theta, dtype=bool) & np.asarray(decisions, dtype=bool)))


@dataclass(frozen=True)
class MethodResult:
    fdp: float
    tp: int
    rejections: int
    false_positives: int
    k_selected: Optional[float]
    threshold: float
    efp_bound: Optional[float] = None
    wall_time: float = 0.0


@dataclass(frozen=True)
class ReplicationResult:
    rep: int
    seed: int
    n_signals: int
    methods: dict


def _score(theta, out, k, efp=None, t0=0.0) -> MethodResult:
    return MethodResult(
        fdp=compute_fdp(theta, out.decisions),
        tp=compute_tp(theta, out.decisions),
        rejections=int(out.decisions.sum()),
        false_positives=int(np.count_nonzero(out.decisions & ~theta)),
        k_selected=k,
        threshold=out.threshold,
        efp_bound=efp,
        wall_time=time.perf_counter() - t0,
    )


def run_replication(cfg: ScenarioConfig, rep: int) -> ReplicationResult:
    """One paired replication: every configured method sees the same draw."""
    seed = cfg.seed + rep
    pi1_true = build_sparsity_layout(cfg)
    theta, p = simulate_replication(cfg, seed, pi1_true)
    pi1_or = clamp_sparsity(pi1_true, cfg.xi)
    wanted = set(cfg.methods)
    results = {}

    if "BH" in wanted:
        t0 = time.perf_counter()
        results["BH"] = _score(theta, bh_procedure(p, cfg.alpha), None, t0=t0)
    if "LAWS.or" in wanted:
        t0 = time.perf_counter()
        out = straw_stepup(weighted_pvalues(p, pi1_or, 1.0), cfg.alpha)
        results["LAWS.or"] = _score(theta, out, 1.0, t0=t0)
    if "STRAW.or" in wanted:
        t0 = time.perf_counter()
        k, out = select_k(p, pi1_or, cfg.grid, cfg.alpha)
        # realized weighted threshold is varphi_k(t*), so the bound is sum(coef) * threshold
        bound = weighted_pvalues(p, pi1_or, k).coefficient_sum * out.threshold
        results["STRAW.or"] = _score(theta, out, k, efp=bound, t0=t0)
    if {"LAWS.dd", "STRAW.dd"} & wanted:
        t0 = time.perf_counter()
        pi1_hat = estimate_sparsity(p, cfg.lattice, cfg.kernel, cfg.xi)
        # data-driven wall times include the shared estimation step
        t_est = time.perf_counter() - t0
        if "LAWS.dd" in wanted:
            t0 = time.perf_counter() - t_est
            out = straw_stepup(weighted_pvalues(p, pi1_hat, 1.0), cfg.alpha)
            results["LAWS.dd"] = _score(theta, out, 1.0, t0=t0)
        if "STRAW.dd" in wanted:
            t0 = time.perf_counter() - t_est
            k, out = select_k(p, pi1_hat, cfg.grid, cfg.alpha)
            results["STRAW.dd"] = _score(theta, out, k, t0=t0)

    ordered = {m: results[m] for m in cfg.methods}
    return ReplicationResult(rep=rep, seed=seed, n_signals=int(theta.sum()), methods=ordered)


class ReplicationError(RuntimeError):
    """A method failed inside one replication; carries the replication and seed."""

    def __init__(self, scenario: str, rep: int, seed: int, cause: BaseException):
        super().__init__(f"scenario {scenario} replication {rep} (seed {seed}) failed: {cause!r}")
        self.scenario, self.rep, self.seed, self.cause = scenario, rep, seed, cause

    def __reduce__(self):
        return type(self), (self.scenario, self.rep, self.seed, self.cause)


def _run_one(args):
    cfg, rep = args
    try:
        return run_replication(cfg, rep)
    except Exception as exc:
        raise ReplicationError(cfg.name, rep, cfg.seed + rep, exc) from exc


def run_replications(cfg: ScenarioConfig, workers: int = 1) -> list[ReplicationResult]:
    jobs = [(cfg, r) for r in range(cfg.reps)]
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


@dataclass(frozen=True)
class MethodSummary:
    method: str
    fdr: float
    fdr_se: float
    atp: float
    atp_se: float
    mean_rejections: float
    mean_false_positives: float
    false_positives_se: float
    mean_efp_bound: Optional[float]
    efp_bound_se: Optional[float]


@dataclass(frozen=True)
class SummaryMetrics:
    config: ScenarioConfig
    methods: dict
    replications: list = field(repr=False, default_factory=list)

    def __getitem__(self, method: str) -> MethodSummary:
        return self.methods[method]


def _mean_se(values: Sequence[float]) -> tuple[float, float]:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se


def summarize(cfg: ScenarioConfig, reps: list[ReplicationResult]) -> SummaryMetrics:
    out = {}
    for method in cfg.methods:
        rows = [r.methods[method] for r in reps]
        fdr, fdr_se = _mean_se([x.fdp for x in rows])
        atp, atp_se = _mean_se([x.tp for x in rows])
        fp, fp_se = _mean_se([x.false_positives for x in rows])
        bounds = [x.efp_bound for x in rows if x.efp_bound is not None]
        efp, efp_se = _mean_se(bounds) if bounds else (None, None)
        out[method] = MethodSummary(
            method=method,
            fdr=fdr,
            fdr_se=fdr_se,
            atp=atp,
            atp_se=atp_se,
            mean_rejections=float(np.mean([x.rejections for x in rows])),
            mean_false_positives=fp,
            false_positives_se=fp_se,
            mean_efp_bound=efp,
            efp_bound_se=efp_se,
        )
    return SummaryMetrics(config=cfg, methods=out, replications=reps)


def run_scenario(cfg: ScenarioConfig, workers: int = 1) -> SummaryMetrics:
    """Run ``cfg.reps`` replications with seeds ``cfg.seed + r`` and aggregate."""
    return summarize(cfg, run_replications(cfg, workers))


def sweep_configs(name: str, values: Optional[Sequence[float]] = None, **overrides) -> list[ScenarioConfig]:
    """One config per value of the scenario's swept parameter."""
    base = scenario(name, **overrides)
    if base.sweep == "mu":
        values = MU_SWEEP if values is None else values
        return [replace(base, mu=float(v)) for v in values]
    values = PI_SWEEP if values is None else values
    return [replace(base, signal_level=float(v)) for v in values]
