"""
donning – Control File Entities
==================================
The build program the engine runs: a ``ControlFile`` maps task names to
ordered step lists.  A step is exactly one of

    RunStep       run a builder command in a throwaway container
    WrapStep      don a host directory as one layer on a base image
    TaskStep      run another task
    TagStep       give an existing image another name
    PushStep      export an image to a directory layout
    GenerateStep  run a builder, then merge the tasks file it wrote

and the ``ExecutionReport`` records what happened, step by step.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional, Union

from donning.entities.execution import Bind
from donning.entities.image import Digest, ImageRef
from donning.exceptions import DonningError, DuplicateTask

TASK_NAME_RE = re.compile(r"^[a-z0-9:_-]+$")
DEFAULT_BINDS: tuple[Bind, ...] = (Bind(".", "/source"),)


# ── Steps ────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Expectation:
    """What a run step must produce to count as a success.

    ``stdout_matches`` is a Python ``re`` pattern searched anywhere in
    stdout (not anchored); ``exit_code`` defaults to 0.
    """

    stdout_matches: Optional[str] = None
    exit_code: int = 0

    def __post_init__(self) -> None:
        if self.stdout_matches is not None:
            re.compile(self.stdout_matches)


@dataclass(frozen=True)
class RunStep:
    image: ImageRef
    command: tuple[str, ...]
    entrypoint: Optional[tuple[str, ...]] = None
    env: tuple[str, ...] = ()
    workdir: str = "/source"
    binds: tuple[Bind, ...] = DEFAULT_BINDS
    expect: Optional[Expectation] = None

    kind = "run"

    def __post_init__(self) -> None:
        if not self.command:
            raise ValueError("run step needs a non-empty command")


@dataclass(frozen=True)
class WrapStep:
    directory: str
    as_ref: ImageRef
    at: str = "/"
    base: Optional[ImageRef] = None
    config_overrides: Mapping[str, Any] = field(default_factory=dict)

    kind = "wrap"

    def __hash__(self) -> int:
        return hash((self.directory, self.as_ref, self.at, self.base))


@dataclass(frozen=True)
class TaskStep:
    task: str

    kind = "task"


@dataclass(frozen=True)
class TagStep:
    source: ImageRef
    as_ref: ImageRef

    kind = "tag"


@dataclass(frozen=True)
class PushStep:
    image: ImageRef
    target: str

    kind = "push"


@dataclass(frozen=True)
class GenerateStep:
    run: RunStep
    tasks_file: str

    kind = "generate"


Step = Union[RunStep, WrapStep, TaskStep, TagStep, PushStep, GenerateStep]


# ── Control file ─────────────────────────────────────────────────

@dataclass(frozen=True)
class ControlFile:
    """Task name -> ordered steps.  Values are never mutated; merging
    returns a new ``ControlFile``."""

    tasks: Mapping[str, tuple[Step, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "tasks", {k: tuple(v) for k, v in self.tasks.items()})

    def merge(self, other: "ControlFile") -> "ControlFile":
        """Union of both task sets.

        Raises
        ------
        DuplicateTask
            A task is defined in both.
        """
        clashes = sorted(set(self.tasks) & set(other.tasks))
        if clashes:
            raise DuplicateTask(f"tasks already defined: {', '.join(clashes)}")
        return replace(self, tasks={**self.tasks, **other.tasks})

    def __contains__(self, name: str) -> bool:
        return name in self.tasks

    def __hash__(self) -> int:
        return hash(tuple(sorted(self.tasks)))

    def __repr__(self) -> str:
        return f"<ControlFile tasks={sorted(self.tasks)}>"


@dataclass(frozen=True)
class PlannedStep:
    """A step together with the task and position it came from."""

    task: str
    index: int
    step: Step


# ── Execution report ─────────────────────────────────────────────

@dataclass
class StepRecord:
    task: str
    index: int
    kind: str
    exit_code: Optional[int] = None
    stdout: str = ""
    stderr: str = ""
    produced: Optional[Digest] = None
    wall_time: float = 0.0
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "index": self.index,
            "kind": self.kind,
            "exit_code": self.exit_code,
            "stdout": self.stdout,
            "stderr": self.stderr,
            "produced": str(self.produced) if self.produced else None,
            "wall_time": round(self.wall_time, 6),
            "error": self.error,
        }


@dataclass
class ExecutionReport:
    """Step records in execution order plus the overall status."""

    records: list[StepRecord] = field(default_factory=list)
    error: Optional[DonningError] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def status(self) -> str:
        return "succeeded" if self.ok else "failed"

    @property
    def produced(self) -> list[Digest]:
        return [r.produced for r in self.records if r.produced is not None]

    def raise_for_status(self) -> "ExecutionReport":
        if self.error is not None:
            raise self.error
        return self

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "error": str(self.error) if self.error else None,
            "steps": [r.to_dict() for r in self.records],
        }

    def __repr__(self) -> str:
        return f"<ExecutionReport status={self.status} steps={len(self.records)}>"
