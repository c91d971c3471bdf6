"""Command-line entry point: ``nmpm-ion {fig1,validate,sweep,evolve}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import FIG1_LAMBDAS, RunConfig, load_config
from .deviations import DeviationReport
from .ion_model import InitialStateSpec

log = logging.getLogger("nmpm_ion")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(s) for s in text.split(",") if s.strip())


def _common(parser: argparse.ArgumentParser, multi: bool) -> None:
    num = _floats if multi else float
    parser.add_argument("--config", type=Path, help="flat key = value config file")
    parser.add_argument("--lambda", dest="lam", type=num,
                        help="perturbation parameter nu/Omega" + (" (comma list)" if multi else ""))
    parser.add_argument("--eta", type=num, help="Lamb-Dicke parameter")
    parser.add_argument("--kappa", type=float, help="detuning multiple")
    parser.add_argument("--alpha", type=num, help="coherent amplitude (real)")
    parser.add_argument("--order", type=int, choices=(1, 2))
    parser.add_argument("--cutoff", type=int, help="Fock cutoff N")
    parser.add_argument("--tau-max", type=float)
    parser.add_argument("--tau-steps", type=int)
    parser.add_argument("--out-dir", type=Path, default=Path("out"))
    parser.add_argument("--workers", type=int)
    parser.add_argument("--print-config", action="store_true",
                        help="print the effective configuration and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nmpm-ion",
        description="Perturbative trapped-ion dynamics in the high-intensity regime.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fig1", help="perturbative vs small-rotation Pe curves per lambda")
    _common(p, multi=True)

    p = sub.add_parser("validate", help="run invariant suites and write the deviation report")
    _common(p, multi=False)

    p = sub.add_parser("sweep", help="comparison rows over a lambda x eta x alpha x tau grid")
    _common(p, multi=True)

    p = sub.add_parser("evolve", help="comparison rows for one parameter set")
    _common(p, multi=False)
    p.add_argument("--initial", type=InitialStateSpec.parse,
                   help="fock_ground:N, fock_excited:N or coherent_excited:ALPHA")
    return parser


def _scalar(v):
    return v[0] if isinstance(v, tuple) else v


def _config(args) -> RunConfig:
    over = dict(
        lam=_scalar(args.lam), eta=_scalar(args.eta), kappa=args.kappa,
        alpha=_scalar(args.alpha), order=args.order, fock_cutoff=args.cutoff,
        tau_max=args.tau_max, tau_steps=args.tau_steps, workers=args.workers,
        initial=getattr(args, "initial", None),
    )
    return load_config(args.config, **over)


def _as_list(value, default) -> tuple:
    if value is None:
        return tuple(default)
    return value if isinstance(value, tuple) else (value,)


def cmd_fig1(args, cfg: RunConfig) -> int:
    from .experiments import run_fig1

    lambdas = _as_list(args.lam, FIG1_LAMBDAS)
    for res in run_fig1(cfg, lambdas, args.out_dir):
        print(f"lambda={res.lam:g}  max|pe_pert - pe_small_rot| = {res.max_err_smallrot():.4e}"
              f"  -> {res.csv_path}")
    return 0


def cmd_sweep(args, cfg: RunConfig) -> int:
    from .experiments import run_sweep
    from .output import write_sweep_csv

    rows = run_sweep(
        cfg,
        _as_list(args.lam, (cfg.lam,)),
        _as_list(args.eta, (cfg.eta,)),
        _as_list(args.alpha, (cfg.alpha,)),
        np.linspace(0.0, cfg.tau_max, cfg.tau_steps),
    )
    path = write_sweep_csv(rows, args.out_dir / "sweep.csv")
    failed = sum(1 for r in rows if r.error)
    print(f"{len(rows)} rows ({failed} with errors) -> {path}")
    return 0


def cmd_evolve(args, cfg: RunConfig) -> int:
    from .experiments import comparison_rows
    from .output import write_comparison_csv, write_comparison_svg

    rows = comparison_rows(cfg)
    stem = f"evolve_lambda{cfg.lam:g}"
    if "csv" in cfg.outputs:
        print(write_comparison_csv(rows, args.out_dir / f"{stem}.csv"))
    if "svg" in cfg.outputs:
        print(write_comparison_svg(rows, args.out_dir / f"{stem}.svg",
                                   f"lambda={cfg.lam:g}, {cfg.initial_state}"))
    worst = max(r.err_pert_exact for r in rows)
    print(f"max|pe_pert - pe_exact| = {worst:.4e}")
    return 0


def cmd_validate(args, cfg: RunConfig) -> int:
    from .validation import run_validation

    report = DeviationReport()
    results = run_validation(report)
    for r in results:
        kind = "hard " if r.hard else "claim"
        detail = ", ".join(f"{k}={v:.3e}" if isinstance(v, float) else f"{k}={v}"
                           for k, v in r.metrics.items())
        print(f"[{r.status:9s}] {kind} {r.name:44s} {r.seconds:7.2f}s  {detail}")
    if "deviation_report" in cfg.outputs:
        path = report.write_csv(args.out_dir / "deviation_report.csv")
        print(f"deviation report: {len(report)} rows -> {path}")
    hard_failures = sum(1 for r in results if r.hard and not r.passed)
    print(f"{hard_failures} hard failure(s)")
    return 1 if hard_failures else 0


COMMANDS = {"fig1": cmd_fig1, "validate": cmd_validate, "sweep": cmd_sweep, "evolve": cmd_evolve}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.print_config:
        sys.stdout.write(cfg.to_text())
        return 0
    return COMMANDS[args.command](args, cfg)


if __name__ == "__main__":
    sys.exit(main())
