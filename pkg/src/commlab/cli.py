"""Command line front end: ``commlab validate | run | list-gallery``.

Exit status: 0 on success, 1 when an analysis raised, 2 for unreadable or
invalid spec files and unknown jobs.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .linalg import DEFAULT_TOL, ToleranceConfig
from .perturbation import gallery
from .runner import run_job, write_report
from .specdoc import Resolver, SpecError, load_document, validate_document

EXIT_OK, EXIT_FAILED, EXIT_INVALID = 0, 1, 2


def _config(args: argparse.Namespace) -> ToleranceConfig:
    cfg = DEFAULT_TOL
    if args.tol is not None:
        cfg = dataclasses.replace(cfg, solve_tol=args.tol, norm_tol=args.tol, identity_tol=args.tol)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _load(path: Path):
    try:
        return load_document(path)
    except OSError as exc:
        print(f"error: {path}: {exc.strerror}", file=sys.stderr)
    except SpecError as exc:
        for d in exc.diagnostics:
            print(f"{path}: {d}", file=sys.stderr)
    return None


def cmd_validate(args: argparse.Namespace) -> int:
    doc = _load(args.spec)
    if doc is None:
        return EXIT_INVALID
    diags = validate_document(doc)
    for d in diags:
        print(f"{args.spec}: {d}")
    errors = sum(d.severity == "error" for d in diags)
    print(f"{args.spec}: {len(doc.operators)} operators, {len(doc.jobs)} jobs, "
          f"{errors} errors, {len(diags) - errors} warnings")
    return EXIT_INVALID if errors else EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    doc = _load(args.spec)
    if doc is None:
        return EXIT_INVALID
    diags = validate_document(doc)
    for d in diags:
        print(f"{args.spec}: {d}", file=sys.stderr)
    if any(d.severity == "error" for d in diags):
        return EXIT_INVALID
    if args.job is not None:
        try:
            jobs = [doc.job(args.job)]
        except KeyError as exc:
            print(f"error: {exc.args[0]}", file=sys.stderr)
            return EXIT_INVALID
    else:
        jobs = list(doc.jobs)

    cfg = _config(args)
    resolver = Resolver(doc)
    status = EXIT_OK
    for job in jobs:
        try:
            report = run_job(doc, job, cfg, resolver)
        except Exception as exc:  # report the module error verbatim and carry on
            print(f"job {job.name} [{job.kind}] failed: {type(exc).__name__}: {exc}", file=sys.stderr)
            status = EXIT_FAILED
            continue
        for line in report.summary:
            print(f"job {job.name} [{job.kind}]: {line}")
        if args.out is not None:
            write_report(report, args.out)
    return status


def cmd_list_gallery(args: argparse.Namespace) -> int:
    for name, inst in gallery(_config(args)).items():
        checks = ", ".join(f"{k}={v:.3g}" for k, v in inst.checks.items())
        print(f"{name}: {inst.description} [{checks}]")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commlab",
        description="Commutator equations, similarity certificates and nearness diagnostics on finite windows.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--tol", type=float, default=None,
                       help="override solve, norm and identity tolerances")
        p.add_argument("--seed", type=int, default=None, help="seed for sampling and random restarts")

    p = sub.add_parser("validate", help="check a spec file without running analyses")
    p.add_argument("--spec", type=Path, required=True, help="path to the JSON spec document")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run one job or all jobs of a spec file")
    p.add_argument("--spec", type=Path, required=True, help="path to the JSON spec document")
    p.add_argument("--job", type=str, default=None, help="job name (default: every job in order)")
    p.add_argument("--out", type=Path, default=None, help="directory for <job>.json and <job>.csv reports")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("list-gallery", help="list the named counterexample instances")
    common(p)
    p.set_defaults(func=cmd_list_gallery)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
