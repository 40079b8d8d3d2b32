"""Command-line entry point.

Subcommands::

    singular-gbs density        --params p.toml --matrix T.csv
    singular-gbs sample         --params p.toml --count N --seed S --out draws.csv
    singular-gbs validate       --suite {univ,m2,singular,jacobian,all} --params p.toml --report r.json
    singular-gbs jacobian-check --shapes 3,2,2,2 --trials 25 --report r.json

Exit status: 0 on success, 1 if an audit fails, 2 for usage, configuration
or input errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import distributions as dist
from .config import RunConfig, dumps17, fmt17, load_config, read_matrix_csv
from .errors import ConfigError, GbsError
from .sampling import RngSpec, sample_gbs
from .validation import (
    SuiteReport,
    audit_nonsingular_m2,
    audit_singular_eigen,
    audit_univariate,
    jacobian_campaign,
)

EXIT_OK, EXIT_AUDIT, EXIT_USAGE = 0, 1, 2
DEFAULT_SHAPES = [(3, 2, 1, 1), (3, 2, 2, 2), (4, 3, 2, 2)]
SUITES = ("univ", "m2", "singular", "jacobian", "all")


def _shapes(text: str):
    try:
        out = [tuple(int(v) for v in part.split(",")) for part in text.split(";") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad shape list {text!r}; use n,m,p,s;n,m,p,s") from None
    if not out or any(len(s) != 4 for s in out):
        raise argparse.ArgumentTypeError("each shape needs four integers n,m,p,s")
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="singular-gbs", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("density", help="log-density of a matrix under the configured model")
    d.add_argument("--params", required=True, type=Path)
    d.add_argument("--matrix", type=Path, help="CSV matrix; defaults to [io].matrix")
    d.add_argument("--law", choices=("gbs", "sqrt", "pinv"), default="gbs",
                   help="T itself, its square root V (n x m), or S = T^+")
    d.add_argument("--form", choices=("reciprocal", "direct"), default="reciprocal")

    s = sub.add_parser("sample", help="draw T matrices and write them as CSV")
    s.add_argument("--params", required=True, type=Path)
    s.add_argument("--count", required=True, type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--stream", type=int)
    s.add_argument("--out", type=Path, help="defaults to [io].out")

    v = sub.add_parser("validate", help="run audit suites")
    v.add_argument("--suite", choices=SUITES, default="all")
    v.add_argument("--params", type=Path)
    v.add_argument("--seed", type=int)
    v.add_argument("--report", type=Path)
    v.add_argument("--threads", type=int, default=1)

    j = sub.add_parser("jacobian-check", help="finite-difference Jacobian campaign")
    j.add_argument("--shapes", type=_shapes, default=DEFAULT_SHAPES)
    j.add_argument("--trials", type=int, default=25)
    j.add_argument("--seed", type=int, default=0)
    j.add_argument("--report", type=Path)
    j.add_argument("--threads", type=int, default=1)
    return ap


def _cfg(path) -> RunConfig:
    return load_config(path) if path is not None else RunConfig()


def _rng(cfg: RunConfig, seed, stream=None) -> RngSpec:
    return RngSpec(cfg.rng.seed if seed is None else seed, cfg.rng.stream if stream is None else stream)


def _cmd_density(args) -> int:
    cfg = _cfg(args.params)
    model = cfg.require_model()
    path = args.matrix or cfg.io.get("matrix")
    if path is None:
        raise ConfigError("no matrix given (--matrix or [io].matrix)")
    A = read_matrix_csv(path)
    out = {"law": args.law}
    if args.law == "gbs":
        terms = dist.gbs_terms(A, model, args.form)
        out.update(logdensity=terms.total, q=terms.q, flags=terms.flags, h_argument=terms.h_arg)
    elif args.law == "sqrt":
        out["logdensity"] = dist.log_density_sqrt_gbs(A, model, args.form)
    else:
        out["logdensity"] = dist.log_density_pinv_transform(A, model, args.form)
    print(dumps17(out))
    return EXIT_OK


def _cmd_sample(args) -> int:
    cfg = _cfg(args.params)
    model = cfg.require_model()
    if args.count < 1:
        raise ConfigError("--count must be positive")
    out = args.out or cfg.io.get("out")
    if out is None:
        raise ConfigError("no output path (--out or [io].out)")
    out = Path(out)
    draws = sample_gbs(model, _rng(cfg, args.seed, args.stream), size=args.count)
    iu = np.triu_indices(model.m)
    with open(out, "w") as fh:
        for T in draws:
            fh.write(",".join(fmt17(x) for x in T.matrix()[iu]) + "\n")
    side = out.with_name(out.name + ".eigenvalues.json")
    side.write_text(dumps17({"schema": 1, "rank": model.p, "eigenvalues": [T.eigenvalues for T in draws]}) + "\n")
    print(dumps17({"draws": args.count, "csv": str(out), "eigenvalues": str(side)}))
    return EXIT_OK


def _run_suite(name, cfg: RunConfig, seed, threads):
    opts = cfg.validate
    rng = _rng(cfg, seed)
    if name == "univ":
        return audit_univariate(cfg.univariate(), int(opts.get("univ_draws", 100_000)), rng)
    if name == "m2":
        return audit_nonsingular_m2(cfg.require_model(), float(opts.get("epsrel", 1e-7)), threads)
    if name == "singular":
        bins = tuple(opts.get("bins", (10, 8)))
        return audit_singular_eigen(cfg.require_model(), int(opts.get("draws", 40_000)), rng, bins)
    shapes = [tuple(s) for s in opts.get("shapes", DEFAULT_SHAPES)]
    return jacobian_campaign(shapes, int(opts.get("trials", 25)), rng, threads)


def _applicable(cfg: RunConfig):
    names = []
    if cfg.model is not None:
        mp = cfg.model
        if mp.n == 1 and mp.m == 1:
            names.append("univ")
        if mp.m == 2 and mp.s == 2 and mp.n >= 2:
            names.append("m2")
        if mp.isotropic_values() is not None and mp.p == 2 and mp.h.samplable:
            names.append("singular")
    return names + ["jacobian"]


def _write_report(report: SuiteReport, path):
    text = dumps17({"schema": 1, "passed": report.passed, "audits": [a.to_dict() for a in report.audits]}, indent=2)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def _summary(report: SuiteReport) -> str:
    return dumps17({"passed": report.passed, "audits": {a.name: a.passed for a in report.audits}})


def _cmd_validate(args) -> int:
    cfg = _cfg(args.params)
    names = _applicable(cfg) if args.suite == "all" else [args.suite]
    report = SuiteReport([_run_suite(n, cfg, args.seed, args.threads) for n in names])
    _write_report(report, args.report)
    print(_summary(report))
    return EXIT_OK if report.passed else EXIT_AUDIT


def _cmd_jacobian(args) -> int:
    audit = jacobian_campaign(args.shapes, args.trials, RngSpec(args.seed), args.threads)
    report = SuiteReport([audit])
    _write_report(report, args.report)
    print(dumps17({"passed": audit.passed, **audit.metrics}))
    return EXIT_OK if audit.passed else EXIT_AUDIT


COMMANDS = {"density": _cmd_density, "sample": _cmd_sample, "validate": _cmd_validate,
            "jacobian-check": _cmd_jacobian}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "threads", 1) < 1:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, GbsError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
