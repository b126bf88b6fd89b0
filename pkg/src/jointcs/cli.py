"""Command-line front end: ``jointcs {solve,sweep,phase,metrics,ric,check}``.

Indices are printed 1-based. Every command writes ``metadata.json`` with the
fully resolved configuration into ``--out``. The seed comes from ``--seed``,
else the ``JOINTCS_SEED`` environment variable, else 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import RicMode, ensemble_metrics, evaluate_conditions, normalized_rics
from .core import EnumerationLimitError, ProblemDims, SensingEnsemble, SignalEnsemble, SolverConfig, SupportSet
from .experiments import (
    ALGORITHMS,
    DEFAULT_GRID,
    SweepConfig,
    phase_transition,
    read_sweep_csv,
    success_full,
    success_support,
    sweep,
    total_error,
    write_agreement_csv,
    write_phase_csv,
    write_sweep_csv,
)
from .generation import Seed, SignalType, draw_instance, sense
from .solver import somp_run

SEED_ENV = "JOINTCS_SEED"
PHASE_SCAN = "for each K, M is scanned upward; M_min is the first grid M with probability >= level"


class CliError(Exception):
    """Execution failure reported with exit status 1."""


def _grid(text: str) -> tuple[int, ...]:
    """Parse ``5:100:5`` (inclusive range) or ``5,10,20``."""
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            if step <= 0 or len(parts) > 3:
                raise ValueError
            values = tuple(range(start, stop + 1, step))
        else:
            values = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}; use START:STOP:STEP or a comma list")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"grid {text!r} must contain positive integers")
    return values


def _algorithms(text: str) -> tuple[str, ...]:
    algs = tuple(a.strip() for a in text.split(",") if a.strip())
    bad = [a for a in algs if a not in ALGORITHMS]
    if bad or not algs:
        raise argparse.ArgumentTypeError(
            f"invalid algorithms {bad or text!r}; choose from {','.join(ALGORITHMS)}"
        )
    return algs


def _resolve_seed(value: Optional[int]) -> tuple[int, str]:
    if value is not None:
        return value, "flag"
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            return int(env), "env"
        except ValueError:
            raise CliError(f"{SEED_ENV}={env!r} is not an integer")
    return 0, "default"


def _add_instance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=100, help="signal length N")
    p.add_argument("--m", type=int, default=50, help="measurements per sensor M")
    p.add_argument("--k", type=int, default=10, help="joint sparsity K")
    p.add_argument("--l", type=int, default=3, help="number of sensors L")
    p.add_argument("--type", dest="signal_type", choices=["1", "2", "3", "4"], default="1",
                   help="signal type I-IV")
    p.add_argument("--seed", type=int, default=None, help=f"master seed (fallback: ${SEED_ENV}, then 0)")
    p.add_argument("--out", type=Path, default=Path("jointcs-out"), help="output directory")


def _add_input_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", type=Path, default=None,
                   help="npz file with arrays x (N x L) and phis (L x M x N) instead of a generated instance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jointcs", description="Joint sparse recovery with SOMP variants.")
    parser.add_argument("--version", action="version", version=f"jointcs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="generate one instance and run one SOMP variant")
    _add_instance_flags(p)
    p.add_argument("--detect", choices=["a", "b"], default="a", help="support detection rule")
    p.add_argument("--estimate", choices=["c", "d"], default="c", help="signal estimation rule")

    p = sub.add_parser("sweep", help="Monte Carlo success rates over an (M, K) grid")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--l", type=int, default=3)
    p.add_argument("--type", dest="signal_type", choices=["1", "2", "3", "4", "all"], default="all")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--m-grid", type=_grid, default=DEFAULT_GRID)
    p.add_argument("--k-grid", type=_grid, default=DEFAULT_GRID)
    p.add_argument("--algorithms", type=_algorithms, default=ALGORITHMS)
    p.add_argument("--level", type=float, default=0.5, help="success level for the phase curves")
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, default=Path("jointcs-out"))

    p = sub.add_parser("phase", help="extract phase-transition curves from a sweep CSV")
    p.add_argument("--input", type=Path, required=True, help="sweep.csv produced by 'sweep'")
    p.add_argument("--level", type=float, default=0.5)
    p.add_argument("--algorithms", type=_algorithms, default=ALGORITHMS)
    p.add_argument("--out", type=Path, default=Path("jointcs-out"))

    p = sub.add_parser("metrics", help="print the ensemble constants eps1, eps2, eps3")
    _add_instance_flags(p)
    _add_input_flag(p)

    p = sub.add_parser("ric", help="restricted isometry constants of the normalised matrices")
    _add_instance_flags(p)
    _add_input_flag(p)
    p.add_argument("--order", type=int, default=None, help="RIC order (default K+1)")
    p.add_argument("--samples", type=int, default=None, help="sampled lower bound with this many supports")

    p = sub.add_parser("check", help="evaluate the sufficient recovery conditions")
    _add_instance_flags(p)
    _add_input_flag(p)
    p.add_argument("--samples", type=int, default=None, help="use sampled RIC lower bounds")
    p.add_argument("--conservative-eps1", action="store_true", help="take eps1 as the minimum over subsets")
    return parser


def _write_metadata(out: Path, command: str, config: dict, seed: tuple[int, str], started: str, extra=None) -> None:
    meta = {
        "tool": "jointcs",
        "version": __version__,
        "command": command,
        "config": config,
        "seed": {"master": seed[0], "source": seed[1]},
        "started": started,
        "finished": _now(),
    }
    if extra:
        meta.update(extra)
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _prepare_out(out: Path) -> Path:
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise CliError(f"cannot write to output directory {out}: {exc}")
    return out


def _dims(args, parser) -> ProblemDims:
    try:
        return ProblemDims(args.n, args.m, args.l, args.k)
    except (ValueError, TypeError) as exc:
        parser.error(str(exc))


def _one_based(s: Sequence[int]) -> str:
    return "{" + ", ".join(str(i + 1) for i in s) + "}"


def _load_instance(args, parser, seed: int):
    """Instance from ``--input`` or generated from the instance flags."""
    if getattr(args, "input", None) is not None:
        try:
            data = np.load(args.input)
            x = np.asarray(data["x"], dtype=float)
            phis = SensingEnsemble(data["phis"])
        except (OSError, KeyError, ValueError) as exc:
            raise CliError(f"cannot read instance from {args.input}: {exc}")
        if x.ndim == 1:
            x = x[:, None]
        omega = SupportSet(tuple(np.flatnonzero(np.any(x != 0, axis=1)).tolist()), x.shape[0])
        signals = SignalEnsemble(x, omega)
        return signals, phis, sense(phis, signals), {"input": str(args.input)}
    dims = _dims(args, parser)
    x, phis, ys = draw_instance(dims, int(args.signal_type), Seed(seed))
    cfg = {"n": dims.n, "m": dims.m, "k": dims.k, "l": dims.l, "type": int(args.signal_type)}
    return x, phis, ys, cfg


def cmd_solve(args, parser) -> int:
    started = _now()
    seed = _resolve_seed(args.seed)
    dims = _dims(args, parser)
    out = _prepare_out(args.out)
    config = SolverConfig(args.detect, args.estimate)
    x, phis, ys = draw_instance(dims, int(args.signal_type), Seed(seed[0]))
    result = somp_run(phis, ys, dims.k, config)
    per_signal = np.linalg.norm(result.estimates - x.x, axis=0)
    print(f"SOMP-({config.detection.value}+{config.estimation.value})  "
          f"N={dims.n} M={dims.m} K={dims.k} L={dims.l} type={SignalType(int(args.signal_type)).label} seed={seed[0]}")
    print(f"true support     {_one_based(x.omega)}")
    print(f"detected support {_one_based(result.support)}")
    print(f"selection order  {', '.join(str(i + 1) for i in result.history)}")
    print(f"iterations       {result.iterations_run}{' (early stop)' if result.early_stopped else ''}")
    for i, e in enumerate(per_signal, start=1):
        print(f"error x^{i}       {e:.6e}")
    print(f"total error      {total_error(result.estimates, x):.6e}")
    print(f"full success     {success_full(result.estimates, x)}")
    print(f"support success  {success_support(result.support, x.omega)}")
    _write_metadata(out, "solve", {
        "n": dims.n, "m": dims.m, "k": dims.k, "l": dims.l, "type": int(args.signal_type),
        "detect": args.detect, "estimate": args.estimate,
    }, seed, started)
    return 0


def cmd_sweep(args, parser) -> int:
    started = _now()
    seed = _resolve_seed(args.seed)
    if args.trials < 0:
        parser.error("--trials must be >= 0")
    if not 0 < args.level <= 1:
        parser.error("--level must lie in (0, 1]")
    types = [1, 2, 3, 4] if args.signal_type == "all" else [int(args.signal_type)]
    try:
        configs = [
            SweepConfig(signal_type=t, n=args.n, l=args.l, m_grid=args.m_grid, k_grid=args.k_grid,
                        trials=args.trials, master_seed=seed[0], algorithms=args.algorithms)
            for t in types
        ]
    except (ValueError, TypeError) as exc:
        parser.error(str(exc))
    out = _prepare_out(args.out)
    results = []
    for cfg in configs:
        print(f"sweeping type {cfg.signal_type.label}: {len(cfg.m_grid)}x{len(cfg.k_grid)} cells, "
              f"{cfg.trials} trials each", file=sys.stderr)
        results.append(sweep(cfg, workers=max(1, args.threads)))
    curves = [phase_transition(r, alg, args.level) for r in results for alg in r.algorithms]
    write_sweep_csv(results, out / "sweep.csv")
    write_phase_csv(curves, out / "phase.csv")
    if any(r.bd_agreement is not None for r in results):
        write_agreement_csv(results, out / "bd_agreement.csv")
    cfg0 = configs[0]
    _write_metadata(out, "sweep", {
        "n": cfg0.n, "l": cfg0.l, "types": types, "trials": cfg0.trials,
        "m_grid": list(cfg0.m_grid), "k_grid": list(cfg0.k_grid),
        "algorithms": list(cfg0.algorithms), "level": args.level, "threads": args.threads,
        "trial_seed_path": "(master, N, M, K, L, type, trial)",
    }, seed, started, {"phase_scan": PHASE_SCAN})
    print(f"wrote {out / 'sweep.csv'} and {out / 'phase.csv'}")
    return 0


def cmd_phase(args, parser) -> int:
    started = _now()
    if not 0 < args.level <= 1:
        parser.error("--level must lie in (0, 1]")
    try:
        results = read_sweep_csv(args.input)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot read sweep CSV {args.input}: {exc}")
    out = _prepare_out(args.out)
    curves = [phase_transition(r, a, args.level) for r in results for a in r.algorithms if a in args.algorithms]
    write_phase_csv(curves, out / "phase.csv")
    _write_metadata(out, "phase", {"input": str(args.input), "level": args.level,
                                   "algorithms": list(args.algorithms)},
                    (0, "unused"), started, {"phase_scan": PHASE_SCAN})
    print(f"wrote {out / 'phase.csv'}")
    return 0


def cmd_metrics(args, parser) -> int:
    started = _now()
    seed = _resolve_seed(args.seed)
    x, _, _, cfg = _load_instance(args, parser, seed[0])
    out = _prepare_out(args.out)
    try:
        metrics = ensemble_metrics(x)
        eps1_min = ensemble_metrics(x, conservative_eps1=True).eps1
    except EnumerationLimitError as exc:
        raise CliError(str(exc))
    print(f"K={x.k} L={x.l} N={x.n}")
    print(f"eps1={metrics.eps1:.17g}")
    print(f"eps1_conservative={eps1_min:.17g}")
    print(f"eps2={metrics.eps2:.17g}")
    print(f"eps3={metrics.eps3:.17g}")
    _write_metadata(out, "metrics", cfg, seed, started)
    return 0


def _print_ric(label: str, r) -> None:
    extra = f" samples={r.samples}" if r.mode is RicMode.SAMPLED else ""
    print(f"{label} order={r.order} delta={r.value:.17g} mode={r.mode.value}{extra}")


def cmd_ric(args, parser) -> int:
    started = _now()
    seed = _resolve_seed(args.seed)
    x, phis, _, cfg = _load_instance(args, parser, seed[0])
    order = args.order if args.order is not None else min(x.k + 1, phis.n)
    if not 1 <= order <= phis.n:
        parser.error(f"--order must lie in [1, {phis.n}]")
    if args.samples is not None and args.samples < 1:
        parser.error("--samples must be >= 1")
    out = _prepare_out(args.out)
    try:
        sensors, stack = normalized_rics(phis, order, args.samples, Seed(seed[0]).child(99))
    except EnumerationLimitError as exc:
        raise CliError(str(exc))
    print("matrices scaled by 1/sqrt(M); stack scaled by 1/sqrt(L*M)")
    for i, r in enumerate(sensors, start=1):
        _print_ric(f"Phi^{i}", r)
    _print_ric("A", stack)
    print(f"delta_max={max(r.value for r in sensors):.17g}")
    _write_metadata(out, "ric", {**cfg, "order": order, "samples": args.samples}, seed, started)
    return 0


def cmd_check(args, parser) -> int:
    started = _now()
    seed = _resolve_seed(args.seed)
    x, phis, _, cfg = _load_instance(args, parser, seed[0])
    if args.samples is not None and args.samples < 1:
        parser.error("--samples must be >= 1")
    out = _prepare_out(args.out)
    try:
        report = evaluate_conditions(x, phis, args.samples, Seed(seed[0]).child(99), args.conservative_eps1)
    except EnumerationLimitError as exc:
        raise CliError(str(exc))
    m = report.metrics
    print(f"K={report.k} L={report.l} eps1={m.eps1:.17g} eps2={m.eps2:.17g} eps3={m.eps3:.17g}")
    for i, r in enumerate(report.sensor_deltas, start=1):
        _print_ric(f"Phi^{i}", r)
    _print_ric("A", report.stack_delta)
    print(f"delta_max={report.delta_max:.17g}")
    t1 = "undefined (some delta >= 1)" if report.theorem1 is None else report.theorem1
    print(f"theorem1 (a+c): {t1}")
    print(f"corollary1 (a+c): {report.corollary1}")
    print(f"theorem2 (b+c): {report.theorem2}")
    print(f"theorem3 (b+d): {report.theorem3}")
    _write_metadata(out, "check", {**cfg, "samples": args.samples,
                                   "conservative_eps1": args.conservative_eps1}, seed, started)
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "phase": cmd_phase,
    "metrics": cmd_metrics,
    "ric": cmd_ric,
    "check": cmd_check,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args, parser)
    except CliError as exc:
        print(f"jointcs: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
