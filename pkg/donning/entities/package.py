"""
donning – Package Entities
=============================
Rows of a ``packages.tsv`` table, the per-packager adapter templates
that turn a row into a build command, and the (package, revision)
target sets autobuild computes with.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import NamedTuple, Optional

from donning.entities.control import ControlFile, ExecutionReport
from donning.entities.image import ImageRef

PLACEHOLDERS = frozenset({"package", "revision"})


@dataclass(frozen=True)
class PackageSpec:
    """One row of the package table: packager, package, revision, test."""

    packager: str
    package: str
    revision: str
    test: str

    def __post_init__(self) -> None:
        for name in ("packager", "package", "revision", "test"):
            if not getattr(self, name).strip():
                raise ValueError(f"{name} must not be empty")

    @property
    def target(self) -> "PackageTarget":
        return PackageTarget(self.package, self.revision)


class PackageTarget(NamedTuple):
    package: str
    revision: str

    def __str__(self) -> str:
        return f"{self.package}:{self.revision}"


@dataclass(frozen=True)
class AdapterTemplate:
    """How one packager builds a package into ``output_dir``.

    ``build_command`` words and ``output_dir`` may use the ``{package}``
    and ``{revision}`` placeholders; a literal brace is written ``{{``.
    ``base`` and ``at`` control where the output is donned.
    """

    packager: str
    image: ImageRef
    build_command: tuple[str, ...]
    output_dir: str
    base: Optional[ImageRef] = None
    at: str = "/"

    def __post_init__(self) -> None:
        if not self.build_command:
            raise ValueError("build_command must not be empty")
        if not self.output_dir:
            raise ValueError("output_dir must not be empty")
        for text in (*self.build_command, self.output_dir):
            for _, field_name, spec, conversion in string.Formatter().parse(text):
                if field_name is None:
                    continue
                if field_name not in PLACEHOLDERS or spec or conversion:
                    raise ValueError(
                        f"unknown placeholder {{{field_name}}} in {text!r} (allowed: {{package}}, {{revision}})"
                    )

    def render_command(self, target: PackageTarget) -> tuple[str, ...]:
        return tuple(word.format(**target._asdict()) for word in self.build_command)

    def render_output_dir(self, target: PackageTarget) -> str:
        return self.output_dir.format(**target._asdict())


@dataclass(frozen=True)
class AutobuildResult:
    """What one autobuild pass decided and, unless dry, what it ran."""

    targets: frozenset
    control: ControlFile
    report: Optional[ExecutionReport] = None

    @property
    def ok(self) -> bool:
        return self.report is None or self.report.ok

    @property
    def task_names(self) -> list[str]:
        return list(self.control.tasks)
