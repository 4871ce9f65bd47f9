"""
donning – Autobuild Controller
=================================
    donning autobuild --spec packages.tsv --adapters FILE --namespace NS
                      [--dry-run] [--runtime BIN] [--store DIR]

Rebuilds every package row whose image is not yet in the store.
"""

from __future__ import annotations

from pathlib import Path

from donning.controllers.build_controller import print_report
from donning.exceptions import UsageError
from donning.services.autobuild_service import AutobuildService
from donning.services.executors import make_executor
from donning.utils.commands import RUNTIME_ARG, STORE_ARG, Arg, CommandBlueprint, Invocation

autobuild_bp = CommandBlueprint("autobuild")


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


@autobuild_bp.command(
    "autobuild",
    help="build and test every package not yet in the store",
    args=[
        Arg.of("--spec", required=True, metavar="TSV"),
        Arg.of("--adapters", required=True, metavar="FILE"),
        Arg.of("--namespace", required=True, metavar="NS"),
        Arg.of("--dry-run", action="store_true", help="only print targets and tasks"),
        Arg.of("-C", "--workdir", help="keep build trees here instead of a temporary directory"),
        RUNTIME_ARG,
        STORE_ARG,
    ],
)
def autobuild(inv: Invocation) -> int:
    args = inv.args
    specs = AutobuildService.parse_packages_tsv(_read(args.spec))
    adapters = AutobuildService.parse_adapters(_read(args.adapters))
    result = AutobuildService.run(
        inv.store(),
        make_executor(inv.runtime()),
        specs,
        adapters,
        args.namespace,
        workdir=args.workdir,
        dry_run=args.dry_run,
    )

    ordered = [s.target for s in specs if s.target in result.targets]
    for target in ordered:
        print(f"target {target}")
    for name in result.task_names:
        print(f"task   {name}")
    if not ordered:
        print("nothing to build")
    if result.report is not None:
        print_report(result.report)
        result.report.raise_for_status()
    return 0
