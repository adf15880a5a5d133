"""Command-line interface: ``straw simulate | analyze | estimate-pi``.

Exit codes: 0 success, 2 user or input error, 3 I/O error, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .procedures import (
    GridSpec,
    StepUpOutcome,
    bh_procedure,
    lfdr_stepup,
    procedure1_bh,
    select_k,
    straw_stepup,
)
from .simulation import METHODS, MU_SWEEP, PI_SWEEP, SCENARIOS, run_scenario, scenario
from .sparsity import KERNELS, KernelSpec, estimate_lfdr, smooth_sparsity
from .tables import (
    InputError,
    atomic_write,
    csv_text,
    fmt,
    json_text,
    lattice_rows,
    read_lattice_csv,
)
from .weighting import DEFAULT_CLIP, clamp_sparsity, weighted_pvalues

log = logging.getLogger("straw")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INTERNAL = 0, 2, 3, 4

ORACLE_METHODS = ("laws-oracle", "straw-oracle", "procedure1")
DATA_METHODS = ("laws-dd", "straw-dd")
ANALYZE_METHODS = ("bh", "lfdr") + ORACLE_METHODS[:2] + DATA_METHODS + ("procedure1",)

FAST_REPS = 25


class InvariantError(RuntimeError):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _grid(text: str) -> GridSpec:
    try:
        return GridSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"--grid expects B1,B2,L: {exc}") from exc


def _add_common(p: argparse.ArgumentParser, alpha=True):
    if alpha:
        p.add_argument("--alpha", type=float, default=0.1, help="target FDR level (default 0.1)")
        p.add_argument("--grid", type=_grid, default=GridSpec(), metavar="B1,B2,L",
                       help="k grid (default 0.5,5,18)")
    p.add_argument("--kernel", choices=KERNELS, default="gaussian")
    p.add_argument("--bandwidth", type=float, default=3.0, help="kernel bandwidth in lattice units")
    p.add_argument("--truncation", type=float, default=10.0, help="neighbourhood radius c")
    p.add_argument("--clip", type=float, default=DEFAULT_CLIP, help="sparsity clamp epsilon")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="straw", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a named simulation scenario")
    sim.add_argument("--scenario", required=True, help=f"one of {', '.join(SCENARIOS)}")
    sim.add_argument("--mu", type=_floats, default=None, help="signal mean(s), comma separated")
    sim.add_argument("--pi", type=_floats, default=None, help="signal-region sparsity level(s)")
    sim.add_argument("--reps", type=int, default=None)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--fast", action="store_true", help=f"{FAST_REPS} replications unless --reps")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--out", type=Path, default=Path("."), help="output directory")
    _add_common(sim)

    ana = sub.add_parser("analyze", help="run one procedure on a lattice p-value file")
    ana.add_argument("--input", type=Path, required=True)
    ana.add_argument("--method", choices=ANALYZE_METHODS, required=True)
    ana.add_argument("--pi1", type=Path, default=None, help="oracle sparsity CSV (coord...,pi1)")
    ana.add_argument("--k", type=float, default=None, help="fixed k for procedure1 (default: grid-selected)")
    ana.add_argument("--out", type=Path, required=True)
    ana.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_common(ana)

    est = sub.add_parser("estimate-pi", help="estimate the local sparsity surface")
    est.add_argument("--input", type=Path, required=True)
    est.add_argument("--out", type=Path, required=True)
    est.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_common(est, alpha=False)
    return parser


def _kernel(args) -> KernelSpec:
    try:
        return KernelSpec(args.kernel, args.bandwidth, args.truncation)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _check_clip(xi: float) -> None:
    if not 0 < xi < 0.5:
        raise InputError("--clip must lie in (0, 0.5)")


def _sidecar_path(out: Path) -> Path:
    return out.with_name(out.stem + ".json")


# ---------------------------------------------------------------- simulate


def _sweep(args):
    base = scenario(args.scenario)
    mus = args.mu if args.mu is not None else (list(MU_SWEEP) if base.sweep == "mu" else [base.mu])
    pis = args.pi if args.pi is not None else (list(PI_SWEEP) if base.sweep == "pi" else [base.signal_level])
    if args.scenario == "null":
        mus, pis = [0.0], [0.0]
    return [(mu, pi) for mu in mus for pi in pis]


def cmd_simulate(args) -> int:
    if args.scenario not in SCENARIOS:
        print(f"straw: unknown scenario {args.scenario!r}; choose from {', '.join(SCENARIOS)}", file=sys.stderr)
        return EXIT_USAGE
    _check_clip(args.clip)
    reps = args.reps if args.reps is not None else (FAST_REPS if args.fast else 100)
    if reps < 1:
        raise InputError("--reps must be positive")
    if not 0 < args.alpha < 1:
        raise InputError("--alpha must lie in (0, 1)")
    kernel = _kernel(args)

    rep_rows, summary_rows, configs = [], [], []
    for mu, pi in _sweep(args):
        cfg = scenario(
            args.scenario, reps=reps, seed=args.seed, alpha=args.alpha, grid=args.grid, kernel=kernel, xi=args.clip
        )
        if args.scenario != "null":
            cfg = replace(cfg, mu=mu, signal_level=pi)
        log.info("running %s %s with %d replications", cfg.name, cfg.param_label, cfg.reps)
        summary = run_scenario(cfg, workers=args.workers)
        configs.append(cfg)
        for r in summary.replications:
            for method, res in r.methods.items():
                rep_rows.append((cfg.name, cfg.param_label, r.rep, method, res.fdp, res.tp, res.rejections,
                                 res.k_selected, r.seed))
        for method, s in summary.methods.items():
            summary_rows.append((cfg.name, method, cfg.param_label, s.fdr, s.fdr_se, s.atp, s.atp_se))

    rep_csv = csv_text(
        ["scenario", "param", "rep", "method", "fdp", "tp", "rejections", "k_selected", "seed"], rep_rows
    )
    sum_csv = csv_text(["scenario", "method", "param", "fdr", "fdr_se", "atp", "atp_se"], summary_rows)
    meta = {
        "scenario": args.scenario,
        "extents": list(configs[0].extents),
        "params": [{"mu": c.mu, "pi": c.signal_level} for c in configs],
        "background": configs[0].background,
        "alpha": args.alpha,
        "reps": reps,
        "seed": args.seed,
        "replication_seeds": f"seed + rep for rep in 0..{reps - 1}",
        "methods": list(METHODS),
        "grid": asdict(args.grid),
        "kernel": asdict(kernel),
        "clip": args.clip,
        "mu_sweep": list(MU_SWEEP),
        "pi_sweep": list(PI_SWEEP),
    }
    out = args.out
    try:
        out.mkdir(parents=True, exist_ok=True)
        atomic_write(out / f"{args.scenario}_replications.csv", rep_csv)
        atomic_write(out / f"{args.scenario}_summary.csv", sum_csv)
        atomic_write(out / f"{args.scenario}_meta.json", json_text(meta))
    except OSError as exc:
        print(f"straw: cannot write results to {out}: {exc}", file=sys.stderr)
        return EXIT_IO

    print(f"{'scenario':<8} {'method':<9} {'param':<16} {'fdr':>7} {'fdr_se':>7} {'atp':>9} {'atp_se':>7}")
    for name, method, param, fdr, fdr_se, atp, atp_se in summary_rows:
        print(f"{name:<8} {method:<9} {param:<16} {fdr:7.4f} {fdr_se:7.4f} {atp:9.2f} {atp_se:7.2f}")
    return EXIT_OK


# ---------------------------------------------------------------- analyze


def _read_pi1(path: Path, table) -> np.ndarray:
    pi_table = read_lattice_csv(path, ("pi1",))
    if pi_table.lattice != table.lattice or pi_table.origin != table.origin:
        raise InputError(f"{path}: sparsity lattice does not match the p-value lattice")
    pi1 = pi_table.columns["pi1"]
    if np.any((pi1 < 0) | (pi1 > 1)) or not np.all(np.isfinite(pi1)):
        raise InputError(f"{path}: sparsity levels must lie in [0, 1]")
    return pi1


def _analyze(args, p, table):
    """Run the requested method; returns (outcome, statistic, pi1_used, extra meta)."""
    method = args.method
    kernel = _kernel(args)
    extra = {}
    if method == "bh":
        out = bh_procedure(p, args.alpha)
        return out, p, None, extra
    if method == "lfdr":
        est = estimate_lfdr(p)
        extra.update(pi0_hat=est.pi0_hat, kde_bandwidth=est.bandwidth)
        out = lfdr_stepup(est.values, args.alpha)
        return out, est.values, None, extra

    if method in ORACLE_METHODS:
        pi1 = clamp_sparsity(_read_pi1(args.pi1, table), args.clip)
    else:
        est = estimate_lfdr(p)
        extra.update(pi0_hat=est.pi0_hat, kde_bandwidth=est.bandwidth)
        pi1 = smooth_sparsity(table.lattice, est, kernel, args.clip)

    if method in ("laws-oracle", "laws-dd"):
        out = straw_stepup(weighted_pvalues(p, pi1, 1.0), args.alpha)
    elif method in ("straw-oracle", "straw-dd"):
        _, out = select_k(p, pi1, args.grid, args.alpha)
    else:
        k = args.k
        if k is None:
            k, _ = select_k(p, pi1, args.grid, args.alpha)
        if not k > 0:
            raise InputError("--k must be positive")
        out = procedure1_bh(p, pi1, k, args.alpha)
    return out, out.statistic, pi1, extra


def _check_outcome(out: StepUpOutcome, stat: np.ndarray, sorted_prefix: bool = False) -> None:
    if int(out.decisions.sum()) != out.l:
        raise InvariantError(f"decision count {int(out.decisions.sum())} differs from l={out.l}")
    # the Lfdr rule rejects a sorted prefix, so ties at the cutoff may be split
    if out.l and not sorted_prefix and not np.array_equal(out.decisions, stat <= out.threshold):
        raise InvariantError("rejection set is not {statistic <= threshold}")


def cmd_analyze(args) -> int:
    _check_clip(args.clip)
    if not 0 <= args.alpha <= 1:
        raise InputError("--alpha must lie in [0, 1]")
    if args.method in ORACLE_METHODS and args.pi1 is None:
        raise InputError(f"method {args.method} needs --pi1")
    if args.method not in ORACLE_METHODS and args.pi1 is not None:
        raise InputError(f"method {args.method} does not take --pi1")
    table = read_lattice_csv(args.input, ("p",))
    p = table.columns["p"]
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise InputError(f"{args.input}: p-values must lie in [0, 1]")

    out, stat, pi1, extra = _analyze(args, p, table)
    _check_outcome(out, stat, sorted_prefix=args.method == "lfdr")

    kernel = _kernel(args)
    meta = {
        "method": args.method,
        "alpha": args.alpha,
        "k_selected": out.k_used,
        "threshold": out.threshold,
        "rejection_count": out.l,
        "m": table.lattice.size,
        "extents": list(table.lattice.extents),
        "origin": list(table.origin),
        "kernel": kernel.family,
        "bandwidth": kernel.bandwidth,
        "truncation": kernel.truncation,
        "clip": args.clip,
        "grid": asdict(args.grid),
        "input": str(args.input),
        "pi1_input": str(args.pi1) if args.pi1 else None,
        "statistic": {"bh": "p", "lfdr": "lfdr_hat", "procedure1": "p_star"}.get(args.method, "p_weighted"),
        **extra,
    }
    columns = {
        "p": p,
        "p_weighted": stat,
        "pi1_used": pi1 if pi1 is not None else [None] * p.size,
        "reject": out.decisions.astype(int),
    }
    header, rows = lattice_rows(table, columns)
    return _emit(args, header, rows, meta)


def _emit(args, header, rows, meta) -> int:
    try:
        if args.format == "json":
            dim = len(meta["extents"])
            records = []
            for row in rows:
                rec = {"coords": row[:dim]}
                for name, v in zip(header[dim:], row[dim:]):
                    rec[name] = None if v is None else (int(v) if name == "reject" else float(fmt(v)))
                records.append(rec)
            atomic_write(args.out, json_text({**meta, "rows": records}))
        else:
            atomic_write(args.out, csv_text(header, rows))
            atomic_write(_sidecar_path(args.out), json_text(meta))
    except OSError as exc:
        print(f"straw: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"{meta.get('method', 'estimate-pi')}: wrote {args.out}")
    return EXIT_OK


# ------------------------------------------------------------ estimate-pi


def cmd_estimate_pi(args) -> int:
    _check_clip(args.clip)
    table = read_lattice_csv(args.input, ("p",))
    p = table.columns["p"]
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise InputError(f"{args.input}: p-values must lie in [0, 1]")
    kernel = _kernel(args)
    est = estimate_lfdr(p)
    pi1 = smooth_sparsity(table.lattice, est, kernel, args.clip)
    meta = {
        "method": "estimate-pi",
        "m": table.lattice.size,
        "extents": list(table.lattice.extents),
        "origin": list(table.origin),
        "kernel": kernel.family,
        "bandwidth": kernel.bandwidth,
        "truncation": kernel.truncation,
        "clip": args.clip,
        "pi0_hat": est.pi0_hat,
        "kde_bandwidth": est.bandwidth,
        "input": str(args.input),
    }
    header, rows = lattice_rows(table, {"lfdr_hat": est.values, "pi1_hat": pi1})
    return _emit(args, header, rows, meta)


COMMANDS = {"simulate": cmd_simulate, "analyze": cmd_analyze, "estimate-pi": cmd_estimate_pi}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"straw: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantError as exc:
        print(f"straw: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except OSError as exc:
        print(f"straw: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
