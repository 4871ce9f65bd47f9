"""
donning – Control File Parser
================================
Reads the YAML control format into a ``ControlFile``.  Phase one of a
build: the file is parsed, ``${NAME}`` references in every string value
are substituted, and every step is validated against its schema.

The grammar is documented in ``docs/control_file.md``.  In short::

    tasks:
      build:
        - run:
            image: frolvlad/alpine-gcc
            command: [gcc, -o, dist/factorizer, factorizer.c]
      package:
        - wrap:
            directory: dist
            base: alpine:3.3
            at: /
            as: test/factorization
            config: {cmd: [/factorizer]}
"""

from __future__ import annotations

import re
from typing import Any, Callable, Mapping, Optional

import yaml

from donning.entities.control import (
    DEFAULT_BINDS,
    TASK_NAME_RE,
    ControlFile,
    Expectation,
    GenerateStep,
    PushStep,
    RunStep,
    Step,
    TagStep,
    TaskStep,
    WrapStep,
)
from donning.entities.execution import Bind
from donning.entities.image import OVERRIDE_FIELDS, ImageRef
from donning.exceptions import (
    ControlFileError,
    ControlSyntaxError,
    DuplicateTask,
    UnknownStepKind,
    UnknownVariable,
)

VarMap = Mapping[str, str]

VAR_NAME_RE = re.compile(r"^[A-Z][A-Z0-9_]*$")
_VAR_REF_RE = re.compile(r"\$\$|\$\{([^}]*)\}|\$\{")


# ── YAML loading with line numbers ───────────────────────────────

class _LineDict(dict):
    """A mapping that remembers the (1-based) line it started on."""

    line: Optional[int] = None


class _LineLoader(yaml.SafeLoader):
    """SafeLoader that rejects duplicate keys and records mapping lines."""

    def construct_mapping(self, node, deep=False):
        seen: set = set()
        for key_node, _ in node.value:
            key = self.construct_object(key_node, deep=deep)
            if key in seen:
                if self._is_task_table(node):
                    raise DuplicateTask(f"line {key_node.start_mark.line + 1}: task {key!r} defined twice")
                raise ControlSyntaxError(f"duplicate key {key!r}", key_node.start_mark.line + 1)
            seen.add(key)
        mapping = _LineDict(super().construct_mapping(node, deep=deep))
        mapping.line = node.start_mark.line + 1
        return mapping

    def _is_task_table(self, node) -> bool:
        parent = getattr(self, "_task_table_node", None)
        return parent is node

    def compose_document(self):
        document = super().compose_document()
        if isinstance(document, yaml.MappingNode):
            for key_node, value_node in document.value:
                if key_node.value == "tasks":
                    self._task_table_node = value_node
        return document


_LineLoader.add_constructor(
    yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _LineLoader.construct_mapping
)


def _load_yaml(data: bytes) -> Any:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ControlSyntaxError(f"control file is not UTF-8: {exc}") from exc
    try:
        return yaml.load(text, Loader=_LineLoader)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ControlSyntaxError(str(exc.problem or exc), line) from exc
    except yaml.YAMLError as exc:
        raise ControlSyntaxError(str(exc)) from exc


def _line(value: Any) -> Optional[int]:
    return getattr(value, "line", None)


# ── Variable substitution ────────────────────────────────────────

class ControlParser:
    """Parses control files and tasks files.

    All methods are static; the parser carries no state between files.
    """

    @staticmethod
    def substitute_vars(text: str, variables: VarMap) -> str:
        """Replace every ``${NAME}`` with ``variables[NAME]``.

        ``$$`` yields a literal ``$``; substituted values are not
        expanded again.  A ``$`` followed by anything else is kept.

        Raises
        ------
        UnknownVariable
            A referenced name is not in *variables*.
        ControlSyntaxError
            A ``${`` does not form a valid reference.
        """

        def _replace(match: re.Match) -> str:
            token = match.group(0)
            if token == "$$":
                return "$"
            name = match.group(1)
            if name is None or not VAR_NAME_RE.match(name):
                raise ControlSyntaxError(
                    f"malformed variable reference {token!r} in {text!r} (write $$ for a literal $)"
                )
            if name not in variables:
                raise UnknownVariable(f"variable {name!r} is not defined")
            return variables[name]

        return _VAR_REF_RE.sub(_replace, text)

    # ── Entry points ─────────────────────────────────────────────

    @classmethod
    def parse_control(cls, data: bytes, variables: Optional[VarMap] = None) -> ControlFile:
        """Parse a control file.

        Raises
        ------
        ControlSyntaxError
            Malformed YAML or a step violating its schema (with line).
        DuplicateTask
            A task name appears twice.
        UnknownStepKind
            A step names a kind other than run/wrap/task/tag/push/generate.
        UnknownVariable
            A ``${NAME}`` reference has no value.
        """
        variables = dict(variables or {})
        for name in variables:
            if not VAR_NAME_RE.match(name):
                raise ControlSyntaxError(f"invalid variable name {name!r}")

        document = _load_yaml(data)
        if document is None:
            document = _LineDict(tasks={})
        if not isinstance(document, dict):
            raise ControlSyntaxError("control file must be a mapping with a 'tasks' key", _line(document))
        unknown = set(document) - {"tasks"}
        if unknown:
            raise ControlSyntaxError(
                f"unknown top-level keys: {', '.join(sorted(map(str, unknown)))}", _line(document)
            )
        table = document.get("tasks") or {}
        if not isinstance(table, dict):
            raise ControlSyntaxError("'tasks' must map task names to step lists", _line(document))

        substitute = lambda s: cls.substitute_vars(s, variables)  # noqa: E731
        tasks = {}
        for name, steps in table.items():
            if not isinstance(name, str) or not TASK_NAME_RE.match(name):
                raise ControlSyntaxError(f"invalid task name {name!r} (allowed: a-z 0-9 : _ -)", _line(table))
            if steps is None:
                steps = []
            if not isinstance(steps, list):
                raise ControlSyntaxError(f"task {name!r} must be a list of steps", _line(table))
            tasks[name] = tuple(cls._parse_step(raw, name, i, substitute, _line(table)) for i, raw in enumerate(steps))
        return ControlFile(tasks)

    parse_tasks_file = parse_control

    # ── Steps ────────────────────────────────────────────────────

    @classmethod
    def _parse_step(
        cls,
        raw: Any,
        task: str,
        index: int,
        substitute: Callable[[str], str],
        fallback_line: Optional[int],
    ) -> Step:
        line = _line(raw) or fallback_line
        if not isinstance(raw, dict) or len(raw) != 1:
            raise ControlSyntaxError(f"task {task!r} step {index}: a step is a single-key mapping", line)
        (kind, body), = raw.items()
        builder = _STEP_BUILDERS.get(kind)
        if builder is None:
            raise UnknownStepKind(f"line {line}: task {task!r} step {index}: unknown step kind {kind!r}")
        try:
            return builder(_Fields(body, kind, substitute, line))
        except ControlFileError:
            raise
        except (ValueError, TypeError) as exc:
            raise ControlSyntaxError(f"task {task!r} step {index} ({kind}): {exc}", line) from exc


class _Fields:
    """Typed, substituted access to one step body; rejects unknown keys."""

    def __init__(self, body: Any, kind: str, substitute: Callable[[str], str], line: Optional[int]) -> None:
        self.kind = kind
        self.line = _line(body) or line
        self._substitute = substitute
        self._used: set[str] = set()
        if isinstance(body, str) and kind == "task":
            body = {"name": body}
        if not isinstance(body, dict):
            raise ControlSyntaxError(f"'{kind}' step needs a mapping", self.line)
        self._body = body

    def _get(self, key: str, required: bool) -> Any:
        self._used.add(key)
        if key not in self._body or self._body[key] is None:
            if required:
                raise ControlSyntaxError(f"'{self.kind}' step is missing '{key}'", self.line)
            return None
        return self._body[key]

    def string(self, key: str, required: bool = False, default: Optional[str] = None) -> Optional[str]:
        value = self._get(key, required)
        if value is None:
            return default
        if isinstance(value, (dict, list)):
            raise ControlSyntaxError(f"'{self.kind}.{key}' must be a string", self.line)
        return self._substitute(str(value))

    def words(self, key: str, required: bool = False) -> Optional[tuple[str, ...]]:
        value = self._get(key, required)
        if value is None:
            return None
        if isinstance(value, str):
            return (self._substitute(value),)
        if not isinstance(value, list) or any(isinstance(v, (dict, list)) for v in value):
            raise ControlSyntaxError(f"'{self.kind}.{key}' must be a string or a list of strings", self.line)
        return tuple(self._substitute(str(v)) for v in value)

    def ref(self, key: str, required: bool = False) -> Optional[ImageRef]:
        text = self.string(key, required)
        return None if text is None else ImageRef.parse(text)

    def mapping(self, key: str) -> dict:
        value = self._get(key, False)
        if value is None:
            return {}
        if not isinstance(value, dict):
            raise ControlSyntaxError(f"'{self.kind}.{key}' must be a mapping", self.line)
        return value

    def raw(self, key: str) -> Any:
        return self._get(key, False)

    def substitute_tree(self, value: Any) -> Any:
        if isinstance(value, str):
            return self._substitute(value)
        if isinstance(value, list):
            return [self.substitute_tree(v) for v in value]
        if isinstance(value, dict):
            return {k: self.substitute_tree(v) for k, v in value.items()}
        return value

    def done(self) -> None:
        unknown = set(self._body) - self._used
        if unknown:
            raise ControlSyntaxError(
                f"'{self.kind}' step has unknown fields: {', '.join(sorted(map(str, unknown)))}", self.line
            )


# ── Step builders ────────────────────────────────────────────────

def _build_run(f: _Fields) -> RunStep:
    expect = None
    raw_expect = f.raw("expect")
    if raw_expect is not None:
        if not isinstance(raw_expect, dict) or set(raw_expect) - {"stdout_matches", "exit_code"}:
            raise ControlSyntaxError("'run.expect' takes only stdout_matches and exit_code", f.line)
        pattern = raw_expect.get("stdout_matches")
        try:
            expect = Expectation(
                stdout_matches=None if pattern is None else f.substitute_tree(str(pattern)),
                exit_code=int(raw_expect.get("exit_code", 0)),
            )
        except re.error as exc:
            raise ControlSyntaxError(f"'run.expect.stdout_matches' is not a valid regex: {exc}", f.line) from exc

    binds = DEFAULT_BINDS
    raw_binds = f.raw("binds")
    if raw_binds is not None:
        if not isinstance(raw_binds, list):
            raise ControlSyntaxError("'run.binds' must be a list", f.line)
        binds = tuple(_bind(f, b) for b in raw_binds)

    step = RunStep(
        image=f.ref("image", required=True),
        command=f.words("command", required=True),
        entrypoint=f.words("entrypoint"),
        env=f.words("env") or (),
        workdir=f.string("workdir", default="/source"),
        binds=binds,
        expect=expect,
    )
    f.done()
    return step


def _bind(f: _Fields, raw: Any) -> Bind:
    if isinstance(raw, str):
        return Bind.parse(f.substitute_tree(raw))
    if isinstance(raw, dict) and set(raw) == {"host", "guest"}:
        return Bind(host=f.substitute_tree(str(raw["host"])), guest=f.substitute_tree(str(raw["guest"])))
    raise ControlSyntaxError("a bind is 'host:guest' or {host, guest}", f.line)


def _build_wrap(f: _Fields) -> WrapStep:
    overrides = f.substitute_tree(f.mapping("config"))
    unknown = set(overrides) - set(OVERRIDE_FIELDS)
    if unknown:
        raise ControlSyntaxError(f"'wrap.config' has unknown fields: {', '.join(sorted(unknown))}", f.line)
    step = WrapStep(
        directory=f.string("directory", required=True),
        as_ref=f.ref("as", required=True),
        at=f.string("at", default="/"),
        base=f.ref("base"),
        config_overrides=overrides,
    )
    f.done()
    return step


def _build_task(f: _Fields) -> TaskStep:
    name = f.string("name", required=True)
    if not TASK_NAME_RE.match(name):
        raise ControlSyntaxError(f"invalid task name {name!r}", f.line)
    f.done()
    return TaskStep(name)


def _build_tag(f: _Fields) -> TagStep:
    step = TagStep(source=f.ref("source", required=True), as_ref=f.ref("as", required=True))
    f.done()
    return step


def _build_push(f: _Fields) -> PushStep:
    step = PushStep(image=f.ref("image", required=True), target=f.string("target", required=True))
    f.done()
    return step


def _build_generate(f: _Fields) -> GenerateStep:
    run = _build_run(_Fields(f.mapping("run"), "run", f._substitute, f.line))
    step = GenerateStep(run=run, tasks_file=f.string("tasks_file", required=True))
    f.done()
    return step


_STEP_BUILDERS: dict[str, Callable[[_Fields], Step]] = {
    "run": _build_run,
    "wrap": _build_wrap,
    "task": _build_task,
    "tag": _build_tag,
    "push": _build_push,
    "generate": _build_generate,
}
