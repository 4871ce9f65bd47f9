"""
donning – Build Engine
=========================
Phase two of a build: plans and executes the requested tasks of a
``ControlFile`` strictly in order, one step at a time.

* ``plan``     – pure depth-first expansion of task references
* ``execute``  – runs the steps against an executor and an image store
* ``check_expectation`` – judges a run step's result

Before the first step runs, every task reference is checked the way
``plan`` would check it; only names a preceding ``generate`` step may
define are left to be resolved at run time.  Task references are then
expanded lazily while executing, against the live control file: a
``generate`` step merges the tasks it produced before the next step
runs, so later ``task`` steps can reach them.  Execution stops at the
first failing step; the error is stored in the report together with
the task name, step index and step kind.
"""

from __future__ import annotations

import logging
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

from donning.entities.control import (
    ControlFile,
    Expectation,
    ExecutionReport,
    GenerateStep,
    PlannedStep,
    PushStep,
    RunStep,
    Step,
    StepRecord,
    TagStep,
    TaskStep,
    WrapStep,
)
from donning.entities.execution import DEFAULT_TIMEOUT_SECS, Bind, ExecRequest, ExecResult
from donning.exceptions import (
    DonningError,
    ExpectationFailed,
    StepFailed,
    TaskCycle,
    UnknownTask,
)
from donning.services.control_parser import ControlParser, VarMap
from donning.services.executors import Executor
from donning.services.host_fs_service import HostFsService
from donning.services.image_store import ImageStore

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExpectationOutcome:
    passed: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.passed


PASSED = ExpectationOutcome(True)


class _Session:
    """Mutable state of one ``execute`` call."""

    def __init__(self, control: ControlFile) -> None:
        self.control = control
        self.report = ExecutionReport()


class BuildEngine:
    """Runs control-file tasks.

    Parameters
    ----------
    executor : Executor
        Runs the builder commands of run and generate steps.
    store : ImageStore
        Target of wrap / tag / push steps.
    workdir : str or Path
        Every relative path in a step resolves against it; it is bound
        at ``/source`` by default.
    variables : VarMap
        Used when parsing tasks files written by generate steps.
    timeout : float
        Per-run timeout handed to the executor.
    """

    def __init__(
        self,
        executor: Executor,
        store: ImageStore,
        workdir: Union[str, Path] = ".",
        variables: Optional[VarMap] = None,
        timeout: float = DEFAULT_TIMEOUT_SECS,
    ) -> None:
        self.executor = executor
        self.store = store
        self.workdir: Path = Path(workdir).resolve()
        self.variables: dict[str, str] = dict(variables or {})
        self.timeout = timeout
        self._handlers: dict[type, Callable[[Step, StepRecord, _Session], None]] = {
            RunStep: self._run,
            WrapStep: self._wrap,
            TagStep: self._tag,
            PushStep: self._push,
            GenerateStep: self._generate,
        }

    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
    #  Planning
    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

    @staticmethod
    def plan(control: ControlFile, requested: Sequence[str]) -> list[PlannedStep]:
        """Flatten *requested* into the steps that would run, in order.

        ``task`` steps are replaced by the steps of the task they name;
        a task referenced twice appears twice.  Touches neither the
        store nor the filesystem.

        Raises
        ------
        UnknownTask
            A requested or referenced task does not exist.
        TaskCycle
            A task (transitively) references itself.
        """
        planned: list[PlannedStep] = []

        def expand(name: str, stack: list[str]) -> None:
            steps = _lookup(control, name, stack)
            for index, step in enumerate(steps):
                if isinstance(step, TaskStep):
                    expand(step.task, [*stack, name])
                else:
                    planned.append(PlannedStep(name, index, step))

        for name in requested:
            expand(name, [])
        return planned

    @staticmethod
    def check_references(control: ControlFile, requested: Sequence[str]) -> None:
        """Walk the task references of *requested* without running anything.

        A name that is not defined yet is accepted only once a
        ``generate`` step has been passed on the way, since that step may
        define it.  Errors carry the referencing step as context.

        Raises
        ------
        UnknownTask
            A reference no earlier generate step could satisfy.
        TaskCycle
            A defined task (transitively) references itself.
        """
        generated = False

        def walk(name: str, stack: list[str]) -> None:
            nonlocal generated
            if generated and name not in control:
                return
            steps = _lookup(control, name, stack)
            for index, step in enumerate(steps):
                if isinstance(step, GenerateStep):
                    generated = True
                elif isinstance(step, TaskStep):
                    try:
                        walk(step.task, [*stack, name])
                    except DonningError as exc:
                        raise exc.with_step(name, index, step.kind)

        for name in requested:
            walk(name, [])

    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
    #  Execution
    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

    def execute(self, control: ControlFile, requested: Sequence[str]) -> ExecutionReport:
        """Run *requested* tasks in order and report every step.

        Never raises a ``DonningError``: the first failure is stored in
        ``report.error`` (use ``report.raise_for_status()``).
        """
        session = _Session(control)
        try:
            missing = [name for name in requested if name not in control]
            if missing:
                raise UnknownTask(f"unknown task(s): {', '.join(missing)}")
            self.check_references(control, requested)
            for name in requested:
                self._run_task(session, name, [])
        except DonningError as exc:
            session.report.error = exc
            logger.error("[BuildEngine] build failed: %s", exc)
        else:
            logger.info("[BuildEngine] %d step(s) succeeded", len(session.report.records))
        return session.report

    def _run_task(self, session: _Session, name: str, stack: list[str]) -> None:
        steps = _lookup(session.control, name, stack)
        for index, step in enumerate(steps):
            if isinstance(step, TaskStep):
                try:
                    self._run_task(session, step.task, [*stack, name])
                except DonningError as exc:
                    raise exc.with_step(name, index, step.kind)
                continue

            record = StepRecord(task=name, index=index, kind=step.kind)
            session.report.records.append(record)
            logger.info("[BuildEngine] %s[%d] %s", name, index, step.kind)
            started = time.monotonic()
            try:
                self._handlers[type(step)](step, record, session)
            except OSError as exc:
                error = StepFailed(str(exc)).with_step(name, index, step.kind)
                record.error = str(error)
                raise error from exc
            except DonningError as exc:
                record.error = str(exc.with_step(name, index, step.kind))
                raise
            finally:
                record.wall_time = time.monotonic() - started

    # ── Step handlers ────────────────────────────────────────────

    def _run(self, step: RunStep, record: StepRecord, session: _Session) -> None:
        result = self.executor.execute(self._request(step))
        record.exit_code = result.exit_code
        record.stdout = result.stdout_text
        record.stderr = result.stderr_text
        if step.expect is not None:
            outcome = self.check_expectation(result, step.expect)
            if not outcome:
                raise ExpectationFailed(outcome.reason)
        elif result.exit_code != 0:
            raise StepFailed(f"command exited with status {result.exit_code}")

    def _wrap(self, step: WrapStep, record: StepRecord, session: _Session) -> None:
        directory = HostFsService.read_directory(self._resolve(step.directory))
        base = self.store.config_for(step.base) if step.base is not None else None
        record.produced = self.store.wrap(base, directory, step.at, step.config_overrides, step.as_ref)

    def _tag(self, step: TagStep, record: StepRecord, session: _Session) -> None:
        digest = self.store.lookup_tag(step.source)
        self.store.tag(step.as_ref, digest)
        record.produced = digest

    def _push(self, step: PushStep, record: StepRecord, session: _Session) -> None:
        record.produced = self.store.export_image(step.image, self._resolve(step.target))

    def _generate(self, step: GenerateStep, record: StepRecord, session: _Session) -> None:
        self._run(step.run, record, session)
        data = self._resolve(step.tasks_file).read_bytes()
        generated = ControlParser.parse_tasks_file(data, self.variables)
        session.control = session.control.merge(generated)
        logger.info("[BuildEngine] generated tasks: %s", ", ".join(sorted(generated.tasks)) or "(none)")

    # ── Helpers ──────────────────────────────────────────────────

    def _resolve(self, relative: str) -> Path:
        return self.workdir / relative

    def _request(self, step: RunStep) -> ExecRequest:
        binds = tuple(Bind(host=str(self._resolve(b.host).resolve()), guest=b.guest) for b in step.binds)
        return ExecRequest(
            command=step.command,
            image=step.image,
            entrypoint=step.entrypoint,
            env=step.env,
            workdir=step.workdir,
            binds=binds,
            timeout=self.timeout,
        )

    @staticmethod
    def check_expectation(result: ExecResult, expectation: Optional[Expectation] = None) -> ExpectationOutcome:
        """Pass iff the exit code matches and, when a pattern is given,
        ``re.search`` finds it in the decoded stdout."""
        expectation = expectation or Expectation()
        if result.exit_code != expectation.exit_code:
            return ExpectationOutcome(
                False, f"exit code {result.exit_code}, expected {expectation.exit_code}"
            )
        pattern = expectation.stdout_matches
        if pattern is not None and re.search(pattern, result.stdout_text) is None:
            return ExpectationOutcome(False, f"stdout does not match {pattern!r}")
        return PASSED

    def __repr__(self) -> str:
        return f"<BuildEngine workdir={str(self.workdir)!r} executor={self.executor!r}>"


def _lookup(control: ControlFile, name: str, stack: list[str]) -> tuple[Step, ...]:
    if name in stack:
        raise TaskCycle([*stack[stack.index(name):], name])
    try:
        return control.tasks[name]
    except KeyError:
        raise UnknownTask(f"unknown task {name!r}") from None
