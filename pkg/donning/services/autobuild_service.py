"""
donning – Autobuild Service
==============================
Unattended image production from a package table.

The desired state ``D`` is the set of (package, revision) pairs in
``packages.tsv``; the actual state ``A`` is read from the store's tag
table (images tagged ``<namespace>/<package>:<revision>``).  Only
``D \\ A`` is rebuilt: removed rows are neither rebuilt nor deleted.

For every target three things are synthesized::

    build:<pkg>:<rev>   adapter run step, then wrap of its output under a staging ref
    test:<pkg>:<rev>    the row's test command, via /bin/sh -c, in the staged image,
                        then a tag of the staged image as <namespace>/<pkg>:<rev>
    autobuild           task steps for all targets, in table order

Staged images live in ``<namespace>-staging``, outside the namespace
scanned for ``A``, so a target whose test fails stays in ``D \\ A``.
"""

from __future__ import annotations

import logging
import re
import tempfile
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

import yaml

from donning.entities.control import ControlFile, RunStep, TagStep, TaskStep, WrapStep
from donning.entities.execution import Bind
from donning.entities.image import ImageRef
from donning.entities.package import (
    AdapterTemplate,
    AutobuildResult,
    PackageSpec,
    PackageTarget,
)
from donning.exceptions import (
    AdapterError,
    DuplicatePackageRevision,
    FieldCountError,
    PackageTableError,
    TaskNameCollision,
    UnknownPackager,
)
from donning.services.build_engine import BuildEngine
from donning.services.executors import Executor
from donning.services.image_store import ImageStore

logger = logging.getLogger(__name__)

AGGREGATE_TASK = "autobuild"
STAGING_SUFFIX = "-staging"
TARGETS_DIR = "targets"
TEST_ENTRYPOINT = ("/bin/sh", "-c")
TSV_FIELDS = 4

_UNSAFE_NAME_CHARS = re.compile(r"[^a-z0-9_-]")


class AutobuildService:

    # ── Parsing ──────────────────────────────────────────────────

    @staticmethod
    def parse_packages_tsv(data: bytes) -> list[PackageSpec]:
        """Parse a tab-separated package table.

        Blank lines and lines starting with ``#`` are skipped; row
        order is kept.

        Raises
        ------
        FieldCountError
            A row does not have exactly four fields.
        DuplicatePackageRevision
            A (package, revision) pair appears twice.
        PackageTableError
            The table is not UTF-8, a field is empty, or the package or
            revision cannot name an image.
        """
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise PackageTableError(f"package table is not UTF-8: {exc}") from exc

        specs: list[PackageSpec] = []
        seen: dict[PackageTarget, int] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != TSV_FIELDS:
                raise FieldCountError(lineno, len(fields))
            try:
                spec = PackageSpec(*fields)
                if "/" in spec.package:
                    raise ValueError(f"package name must not contain '/': {spec.package!r}")
                ImageRef(f"ns/{spec.package}", spec.revision)
            except ValueError as exc:
                raise PackageTableError(f"line {lineno}: {exc}") from exc
            if spec.target in seen:
                raise DuplicatePackageRevision(
                    f"line {lineno}: {spec.target} already listed on line {seen[spec.target]}"
                )
            seen[spec.target] = lineno
            specs.append(spec)
        return specs

    @staticmethod
    def parse_adapters(data: bytes) -> dict[str, AdapterTemplate]:
        """Parse an adapters file (YAML, top-level key ``adapters``).

        ::

            adapters:
              conda:
                image: continuumio/miniconda3
                build_command: [sh, -c, "install {package}={revision} /source/dist"]
                output_dir: dist
                base: alpine:3.3      # optional
                at: /usr/local        # optional, default /
        """
        try:
            document = yaml.safe_load(data.decode("utf-8")) or {}
        except (UnicodeDecodeError, yaml.YAMLError) as exc:
            raise AdapterError(f"adapters file is not valid YAML: {exc}") from exc
        if not isinstance(document, dict) or set(document) - {"adapters"}:
            raise AdapterError("adapters file must be a mapping with a single 'adapters' key")
        table = document.get("adapters") or {}
        if not isinstance(table, dict):
            raise AdapterError("'adapters' must map packager names to templates")

        adapters: dict[str, AdapterTemplate] = {}
        for packager, body in table.items():
            adapters[str(packager)] = _adapter(str(packager), body)
        return adapters

    # ── Targets ──────────────────────────────────────────────────

    @staticmethod
    def desired_targets(specs: Iterable[PackageSpec]) -> frozenset:
        return frozenset(spec.target for spec in specs)

    @staticmethod
    def actual_targets(store: ImageStore, namespace: str) -> frozenset:
        """Pairs already tagged ``<namespace>/<package>:<revision>``."""
        prefix = namespace.rstrip("/") + "/"
        found = set()
        for ref, _ in store.list_tags():
            if ref.repository.startswith(prefix):
                package = ref.repository[len(prefix):]
                if "/" not in package:
                    found.add(PackageTarget(package, ref.version))
        return frozenset(found)

    @staticmethod
    def determine_targets(desired: frozenset, actual: frozenset) -> frozenset:
        return frozenset(desired) - frozenset(actual)

    # ── Task synthesis ───────────────────────────────────────────

    @staticmethod
    def image_ref(namespace: str, target: PackageTarget) -> ImageRef:
        return ImageRef(f"{namespace.rstrip('/')}/{target.package}", target.revision)

    @classmethod
    def staging_ref(cls, namespace: str, target: PackageTarget) -> ImageRef:
        """Where a target's image waits until its test passes."""
        return cls.image_ref(namespace.rstrip("/") + STAGING_SUFFIX, target)

    @staticmethod
    def task_names(target: PackageTarget) -> tuple[str, str]:
        """``(build:<pkg>:<rev>, test:<pkg>:<rev>)`` with unsafe characters
        replaced by ``_``."""
        pkg = _UNSAFE_NAME_CHARS.sub("_", target.package.lower())
        rev = _UNSAFE_NAME_CHARS.sub("_", target.revision.lower())
        return f"build:{pkg}:{rev}", f"test:{pkg}:{rev}"

    @classmethod
    def target_dir(cls, target: PackageTarget) -> str:
        build_name, _ = cls.task_names(target)
        _, pkg, rev = build_name.split(":")
        return f"{TARGETS_DIR}/{pkg}/{rev}"

    @classmethod
    def synthesize_tasks(
        cls,
        targets: Iterable[PackageTarget],
        specs: Sequence[PackageSpec],
        adapters: Mapping[str, AdapterTemplate],
        namespace: str,
        existing: Optional[ControlFile] = None,
    ) -> ControlFile:
        """Build, test and aggregate tasks for *targets*, in table order.

        Each target gets its own source directory under ``targets/``,
        bound at ``/source`` for the build command.  The final tag is
        only written by the last step of the test task.

        Raises
        ------
        UnknownPackager
            A target's packager has no adapter.
        TaskNameCollision
            Two targets derive the same task name, or a name is already
            defined in *existing*.
        """
        wanted = set(targets)
        taken = set(existing.tasks) if existing is not None else set()
        tasks: dict[str, tuple] = {}
        aggregate: list[TaskStep] = []

        for spec in specs:
            if spec.target not in wanted:
                continue
            adapter = adapters.get(spec.packager)
            if adapter is None:
                raise UnknownPackager(f"no adapter for packager {spec.packager!r} ({spec.target})")

            build_name, test_name = cls.task_names(spec.target)
            for name in (build_name, test_name):
                if name in tasks or name in taken:
                    raise TaskNameCollision(f"task {name!r} derived from {spec.target} is already defined")

            ref = cls.image_ref(namespace, spec.target)
            staged = cls.staging_ref(namespace, spec.target)
            source = cls.target_dir(spec.target)
            tasks[build_name] = (
                RunStep(
                    image=adapter.image,
                    command=adapter.render_command(spec.target),
                    binds=(Bind(source, "/source"),),
                ),
                WrapStep(
                    directory=f"{source}/{adapter.render_output_dir(spec.target)}",
                    as_ref=staged,
                    at=adapter.at,
                    base=adapter.base,
                ),
            )
            tasks[test_name] = (
                RunStep(
                    image=staged,
                    command=(spec.test,),
                    entrypoint=TEST_ENTRYPOINT,
                    workdir="/",
                    binds=(),
                ),
                TagStep(source=staged, as_ref=ref),
            )
            aggregate += [TaskStep(build_name), TaskStep(test_name)]

        if aggregate:
            if AGGREGATE_TASK in taken:
                raise TaskNameCollision(f"task {AGGREGATE_TASK!r} is already defined")
            tasks[AGGREGATE_TASK] = tuple(aggregate)
        return ControlFile(tasks)

    # ── Composition ──────────────────────────────────────────────

    @classmethod
    def run(
        cls,
        store: ImageStore,
        executor: Executor,
        specs: Sequence[PackageSpec],
        adapters: Mapping[str, AdapterTemplate],
        namespace: str,
        workdir: Optional[Union[str, Path]] = None,
        dry_run: bool = False,
    ) -> AutobuildResult:
        """Compute ``D \\ A``, synthesize its tasks and, unless *dry_run*,
        run the aggregate task.  Without *workdir* a temporary directory
        is used and removed afterwards."""
        targets = cls.determine_targets(cls.desired_targets(specs), cls.actual_targets(store, namespace))
        control = cls.synthesize_tasks(targets, specs, adapters, namespace)
        logger.info("[Autobuild] %d target(s) in %s: %s", len(targets), namespace, sorted(map(str, targets)))
        if dry_run or not targets:
            return AutobuildResult(targets, control)

        with tempfile.TemporaryDirectory(prefix="donning-autobuild-") as scratch:
            root = Path(workdir) if workdir is not None else Path(scratch)
            for target in targets:
                (root / cls.target_dir(target)).mkdir(parents=True, exist_ok=True)
            report = BuildEngine(executor, store, root).execute(control, [AGGREGATE_TASK])
        return AutobuildResult(targets, control, report)


def _adapter(packager: str, body: Any) -> AdapterTemplate:
    if not isinstance(body, dict):
        raise AdapterError(f"adapter {packager!r} must be a mapping")
    unknown = set(body) - {"image", "build_command", "output_dir", "base", "at"}
    if unknown:
        raise AdapterError(f"adapter {packager!r} has unknown fields: {', '.join(sorted(unknown))}")
    missing = {"image", "build_command", "output_dir"} - set(body)
    if missing:
        raise AdapterError(f"adapter {packager!r} is missing: {', '.join(sorted(missing))}")

    command = body["build_command"]
    if isinstance(command, str):
        command = [command]
    if not isinstance(command, list):
        raise AdapterError(f"adapter {packager!r}: build_command must be a string or a list")
    try:
        return AdapterTemplate(
            packager=packager,
            image=ImageRef.parse(str(body["image"])),
            build_command=tuple(str(word) for word in command),
            output_dir=str(body["output_dir"]),
            base=ImageRef.parse(str(body["base"])) if body.get("base") else None,
            at=str(body.get("at") or "/"),
        )
    except ValueError as exc:
        raise AdapterError(f"adapter {packager!r}: {exc}") from exc
