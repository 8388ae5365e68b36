"""``seglab`` command line: validate, solve, sweep, diagnose, classify, run, synth."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline as pl
from . import synthetic
from .config import ExperimentConfig, load_config
from .errors import ConfigError, SeglabError
from .grid import make_grid, write_fieldset

log = logging.getLogger("seglab")

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
    p.add_argument("--threads", type=int, default=1, metavar="N",
                   help="worker threads for per-point classification")
    p.add_argument("--quiet", action="store_true", help="only report errors")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seglab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and cross-check a configuration")
    _common(p)
    p.add_argument("config")
    for name, help_ in (("solve", "solve along the schedule and dump the final field"),
                        ("sweep", "solve along the schedule and dump every field"),
                        ("run", "sweep, diagnostics, classification, reports and plots")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.add_argument("config")
    for name, help_ in (("diagnose", "diagnostics of a dumped field"),
                        ("classify", "free-boundary classification of a dumped field")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.add_argument("config")
        p.add_argument("dump")

    p = sub.add_parser("synth", help="write a homogeneous model field as a dump")
    _common(p)
    p.add_argument("model", choices=sorted(synthetic.MODELS))
    p.add_argument("--dim", type=int, default=2, choices=(1, 2))
    p.add_argument("--n", type=int, default=256, help="cells per axis")
    p.add_argument("--extent", type=float, nargs=2, default=(-1.0, 1.0), metavar=("LO", "HI"))
    p.add_argument("--slopes", type=float, nargs=2, default=(1.0, 1.0), metavar=("S1", "S2"),
                   help="slopes of the two sides for the kink model")
    return parser


def _load(path) -> ExperimentConfig | None:
    try:
        return load_config(path)
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return None


def _outdir(args, cfg: ExperimentConfig | None) -> Path:
    args.out_path = pl.prepare_output(args.out or (cfg.output_dir if cfg else "out"))
    return args.out_path


def _failed(out: Path, entries) -> int:
    bad = []
    for e in entries:
        if e.converged:
            continue
        msg = e.error or (e.result.events[-1] if e.result and e.result.events else "not converged")
        bad.append(msg if msg.startswith("beta=") else f"beta={e.beta:g}: {msg}")
    if bad:
        pl.mark_failed(out, bad)
        for b in bad:
            log.error("solve failed at %s", b)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return EXIT_ERROR
    if not args.quiet:
        print(f"{args.config}: ok  ({cfg.grid.describe()}, d={cfg.d}, "
              f"{len(cfg.schedule)} beta value(s), config {cfg.config_hash})")
    return EXIT_OK


def _solve_stage(args, which: str) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return EXIT_ERROR
    out = _outdir(args, cfg)
    entries = pl.run_sweep(cfg)
    pl.write_convergence(out, entries)
    pl.dump_fields(out, entries, cfg, which)
    return _failed(out, entries)


def cmd_solve(args) -> int:
    return _solve_stage(args, "final")


def cmd_sweep(args) -> int:
    return _solve_stage(args, "all")


def cmd_run(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return EXIT_ERROR
    out = _outdir(args, cfg)
    entries = pl.run_sweep(cfg)
    pl.write_convergence(out, entries)
    if cfg.dumps:
        pl.dump_fields(out, entries, cfg, "all")
    solved = [e for e in entries if e.result is not None]
    reports = []
    final = None
    for k, e in enumerate(solved):
        f = pl.quantize(e.result.fields)
        log.info("diagnostics at beta=%g", e.beta)
        rep = pl.sweep_diagnostics(cfg, f, e.beta)
        if k == len(solved) - 1:
            rep = pl.final_diagnostics(cfg, f, rep)
            final = f
        reports.append(rep)
    pl.write_sweep_diag(out, reports, cfg)
    notes = []
    cls = None
    if final is not None:
        pl.write_frequency(out, reports[-1], final.grid.dim)
        if cfg.classification.enabled:
            cls = pl.classify_field(cfg, final, pl.cpu_threads(args.threads))
            pl.write_classification(out, cls)
        if cfg.plots:
            pl.write_plots(out, final, cls.nodal_points if cls else None)
    else:
        notes.append("no solve produced a field")
    pl.write_reports(out, pl.report_dict(cfg, entries, reports, cls, notes))
    return _failed(out, entries)


def _dump_stage(args):
    cfg = _load(args.config)
    if cfg is None:
        return None
    f, beta, notes = pl.load_dump(cfg, args.dump)
    return cfg, f, beta, notes


def cmd_diagnose(args) -> int:
    got = _dump_stage(args)
    if got is None:
        return EXIT_ERROR
    cfg, f, beta, notes = got
    out = _outdir(args, cfg)
    rep = pl.final_diagnostics(cfg, f, pl.sweep_diagnostics(cfg, f, beta))
    pl.write_sweep_diag(out, [rep], cfg)
    pl.write_frequency(out, rep, f.grid.dim)
    pl.write_reports(out, pl.report_dict(cfg, [], [rep], None, notes))
    return EXIT_OK


def cmd_classify(args) -> int:
    got = _dump_stage(args)
    if got is None:
        return EXIT_ERROR
    cfg, f, beta, notes = got
    out = _outdir(args, cfg)
    cls = pl.classify_field(cfg, f, pl.cpu_threads(args.threads))
    if not cls.points:
        cls.notes.append("no free-boundary points classified")
    pl.write_classification(out, cls)
    if cfg.plots:
        pl.write_plots(out, f, cls.nodal_points, "dump")
    pl.write_reports(out, pl.report_dict(cfg, [], [], cls, notes))
    for n in cls.notes:
        log.info("note: %s", n)
    return EXIT_OK


def cmd_synth(args) -> int:
    out = pl.prepare_output(args.out or ".")
    extent = [tuple(args.extent)] * args.dim
    grid = make_grid(args.dim, extent, args.n)
    maker = synthetic.MODELS[args.model]
    f = maker(grid, slopes=tuple(args.slopes)) if args.model == "kink" else maker(grid)
    path = out / f"{args.model}.txt"
    write_fieldset(path, f, {"model": args.model})
    if not args.quiet:
        print(path)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate, "solve": cmd_solve, "sweep": cmd_sweep, "run": cmd_run,
    "diagnose": cmd_diagnose, "classify": cmd_classify, "synth": cmd_synth,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="seglab: %(message)s", stream=sys.stderr, force=True)
    try:
        return COMMANDS[args.command](args)
    except pl.OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except SeglabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        if getattr(args, "out_path", None) is not None:
            pl.mark_failed(args.out_path, [f"{type(exc).__name__}: {exc}"])
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
