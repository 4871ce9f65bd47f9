"""
donning – Execution Entities
===============================
What an executor is asked to run (``ExecRequest``) and what it reports
back (``ExecResult``).  The request fixes the builder's environment:
image, command, env, working directory and the host directories bound
into it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from donning.entities.image import ImageRef
from donning.exceptions import ControlSyntaxError
from donning.utils import paths

DEFAULT_TIMEOUT_SECS: float = 3600.0


@dataclass(frozen=True)
class Bind:
    """A host directory made visible at *guest* inside the builder.

    *host* is relative (to the engine workdir) in control files and
    absolute once resolved for an executor.
    """

    host: str
    guest: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "guest", paths.normalize_mount_point(self.guest))

    @classmethod
    def parse(cls, text: str) -> "Bind":
        """Parse the short ``host:guest`` form."""
        host, sep, guest = text.rpartition(":")
        if not sep or not host or not guest:
            raise ControlSyntaxError(f"bind must look like 'host:guest': {text!r}")
        return cls(host=host, guest=guest)

    def __str__(self) -> str:
        return f"{self.host}:{self.guest}"


@dataclass(frozen=True)
class ExecRequest:
    """One builder invocation.

    Parameters
    ----------
    image : ImageRef or None
        Ignored by the host executor.
    command : tuple[str, ...]
        Must be non-empty unless an entrypoint is given.
    entrypoint : tuple[str, ...] or None
    env : tuple[str, ...]
        ``KEY=VALUE`` entries.
    workdir : str
        Guest path of the working directory.
    binds : tuple[Bind, ...]
        Host paths here are absolute.  Guest paths are unique.
    timeout : float
        Seconds before the run is killed.
    """

    command: tuple[str, ...]
    image: Optional[ImageRef] = None
    entrypoint: Optional[tuple[str, ...]] = None
    env: tuple[str, ...] = ()
    workdir: str = "/source"
    binds: tuple[Bind, ...] = ()
    timeout: float = DEFAULT_TIMEOUT_SECS

    def __post_init__(self) -> None:
        if not self.command and not self.entrypoint:
            raise ValueError("ExecRequest needs a command or an entrypoint")
        guests = [b.guest for b in self.binds]
        if len(guests) != len(set(guests)):
            raise ValueError(f"bind guest paths must be unique: {guests}")
        object.__setattr__(self, "workdir", paths.normalize_mount_point(self.workdir))

    @property
    def argv(self) -> list[str]:
        """Entrypoint words followed by command words."""
        return [*(self.entrypoint or ()), *self.command]


@dataclass(frozen=True)
class ExecResult:
    """Outcome of one builder run.

    ``exit_code`` is always set; a process killed by signal N reports
    128 + N.
    """

    exit_code: int
    stdout: bytes = b""
    stderr: bytes = b""
    wall_time: float = 0.0

    @property
    def stdout_text(self) -> str:
        return self.stdout.decode("utf-8", errors="replace")

    @property
    def stderr_text(self) -> str:
        return self.stderr.decode("utf-8", errors="replace")

    def __repr__(self) -> str:
        return f"<ExecResult exit={self.exit_code} stdout={len(self.stdout)}B>"

