"""
donning – Build Controller
=============================
    donning build [-f FILE] [-C WORKDIR] [-s NAME=VALUE]... [--runtime BIN]
                  [--store DIR] [--report FILE] TASK...

Parses the control file, runs the requested tasks and prints one line
per executed step.  ``--report`` additionally writes the execution
report as JSON.
"""

from __future__ import annotations

import json
from pathlib import Path

from donning.config import Config
from donning.entities.control import ExecutionReport
from donning.exceptions import UsageError
from donning.services.build_engine import BuildEngine
from donning.services.control_parser import ControlParser
from donning.services.executors import make_executor
from donning.utils.commands import RUNTIME_ARG, STORE_ARG, Arg, CommandBlueprint, Invocation

build_bp = CommandBlueprint("build")


def parse_var_assignments(assignments: list[str]) -> dict[str, str]:
    """``["TAG=demo/blog:v1"]`` -> ``{"TAG": "demo/blog:v1"}``; later wins."""
    variables: dict[str, str] = {}
    for item in assignments:
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise UsageError(f"-s expects NAME=VALUE, got {item!r}")
        variables[name] = value
    return variables


def print_report(report: ExecutionReport) -> None:
    for record in report.records:
        status = "FAIL" if record.error else "ok"
        line = f"{status:<4} {record.task}[{record.index}] {record.kind}"
        if record.exit_code is not None:
            line += f" exit={record.exit_code}"
        if record.produced is not None:
            line += f" -> {record.produced}"
        print(f"{line} ({record.wall_time:.2f}s)")
        for out in record.stdout.splitlines():
            print(f"     | {out}")
    print(f"build {report.status}")


def write_report(report: ExecutionReport, target: str) -> None:
    Path(target).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
#  donning build
# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

@build_bp.command(
    "build",
    help="run tasks of a control file",
    args=[
        Arg.of("-f", "--file", default=Config.CONTROL_FILE, help="control file (default: %(default)s)"),
        Arg.of("-C", "--workdir", default=".", help="build directory (default: %(default)s)"),
        Arg.of("-s", "--set", dest="variables", action="append", default=[], metavar="NAME=VALUE"),
        RUNTIME_ARG,
        STORE_ARG,
        Arg.of("--report", metavar="FILE", help="write the execution report as JSON"),
        Arg.of("tasks", nargs="+", metavar="TASK"),
    ],
)
def build(inv: Invocation) -> int:
    args = inv.args
    variables = parse_var_assignments(args.variables)
    workdir = Path(args.workdir)
    if not workdir.is_dir():
        raise UsageError(f"workdir is not a directory: {workdir}")
    try:
        data = Path(args.file).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read control file {args.file}: {exc.strerror}") from exc

    control = ControlParser.parse_control(data, variables)
    engine = BuildEngine(
        make_executor(inv.runtime()),
        inv.store(),
        workdir,
        variables,
        timeout=Config.exec_timeout(),
    )
    report = engine.execute(control, args.tasks)
    print_report(report)
    if args.report:
        write_report(report, args.report)
    report.raise_for_status()
    return 0
