"""Control-file parsing, validation and variable substitution."""

from __future__ import annotations

import textwrap

import pytest

from donning.entities.control import (
    DEFAULT_BINDS,
    Expectation,
    GenerateStep,
    PushStep,
    RunStep,
    TagStep,
    TaskStep,
    WrapStep,
)
from donning.entities.execution import Bind
from donning.entities.image import ImageRef
from donning.exceptions import (
    ControlSyntaxError,
    DuplicateTask,
    UnknownStepKind,
    UnknownVariable,
)
from donning.services.control_parser import ControlParser


def parse(text: str, **variables: str):
    return ControlParser.parse_control(textwrap.dedent(text).encode(), variables)


# ── Variables ────────────────────────────────────────────────────

def test_substitute_variable():
    assert ControlParser.substitute_vars("${TAG}", {"TAG": "demo/blog:v1"}) == "demo/blog:v1"


def test_substitute_without_references_is_identity():
    assert ControlParser.substitute_vars("no vars here", {}) == "no vars here"
    assert ControlParser.substitute_vars("cost: $5", {}) == "cost: $5"


def test_substitute_unknown_variable():
    with pytest.raises(UnknownVariable):
        ControlParser.substitute_vars("${MISSING}", {})


def test_substitute_dollar_escape_and_no_reexpansion():
    assert ControlParser.substitute_vars("$${TAG}", {"TAG": "x"}) == "${TAG}"
    assert ControlParser.substitute_vars("${A}", {"A": "${B}"}) == "${B}"


@pytest.mark.parametrize("text", ["${", "${lower}", "${A", "${}"])
def test_substitute_malformed_reference(text):
    with pytest.raises(ControlSyntaxError):
        ControlParser.substitute_vars(text, {"A": "a"})


# ── Steps ────────────────────────────────────────────────────────

def test_wrap_task():
    control = parse(
        """
        tasks:
          wrap:
            - wrap:
                directory: dist
                base: alpine:3.3
                at: /usr/local/bin
                as: test/factorization
                config:
                  cmd: [/usr/local/bin/factorizer]
        """
    )
    assert list(control.tasks) == ["wrap"]
    (step,) = control.tasks["wrap"]
    assert step == WrapStep(
        directory="dist",
        as_ref=ImageRef("test/factorization"),
        at="/usr/local/bin",
        base=ImageRef("alpine", "3.3"),
        config_overrides={"cmd": ["/usr/local/bin/factorizer"]},
    )


def test_run_step_defaults():
    control = parse(
        """
        tasks:
          build:
            - run:
                image: frolvlad/alpine-gcc
                command: [gcc, -o, dist/factorizer, factorizer.c]
        """
    )
    (step,) = control.tasks["build"]
    assert step == RunStep(
        image=ImageRef("frolvlad/alpine-gcc"),
        command=("gcc", "-o", "dist/factorizer", "factorizer.c"),
    )
    assert step.workdir == "/source"
    assert step.binds == DEFAULT_BINDS == (Bind(".", "/source"),)


def test_run_step_full():
    control = parse(
        """
        tasks:
          test:
            - run:
                image: ubuntu
                entrypoint: [/bin/sh, -c]
                command: "./a | grep a"
                env: [A=1]
                workdir: /data
                binds: ["./data:/data", {host: cache, guest: /cache}]
                expect: {stdout_matches: "/usr/local/bin/a", exit_code: 0}
        """
    )
    (step,) = control.tasks["test"]
    assert step.command == ("./a | grep a",)
    assert step.entrypoint == ("/bin/sh", "-c")
    assert step.binds == (Bind("./data", "/data"), Bind("cache", "/cache"))
    assert step.expect == Expectation(stdout_matches="/usr/local/bin/a")


def test_other_step_kinds():
    control = parse(
        """
        tasks:
          all:
            - task: build
            - task: {name: package}
            - tag: {source: "demo/app:${VERSION}", as: demo/app}
            - push: {image: demo/app, target: out/export}
            - generate:
                run: {image: alpine, command: [sh, gen.sh]}
                tasks_file: .tasks
        """,
        VERSION="1.0",
    )
    assert control.tasks["all"] == (
        TaskStep("build"),
        TaskStep("package"),
        TagStep(ImageRef("demo/app", "1.0"), ImageRef("demo/app")),
        PushStep(ImageRef("demo/app"), "out/export"),
        GenerateStep(RunStep(image=ImageRef("alpine"), command=("sh", "gen.sh")), ".tasks"),
    )


def test_variables_are_substituted_everywhere():
    control = parse(
        """
        tasks:
          package:
            - wrap: {directory: "${DIR}", as: "${TAG}", config: {env: ["V=${TAG}"]}}
        """,
        TAG="demo/blog:v1",
        DIR="dist",
    )
    (step,) = control.tasks["package"]
    assert step.as_ref == ImageRef("demo/blog", "v1")
    assert step.directory == "dist"
    assert step.config_overrides == {"env": ["V=demo/blog:v1"]}


def test_empty_file_and_empty_task():
    assert ControlParser.parse_control(b"", {}).tasks == {}
    assert parse("tasks:\n  nothing:\n").tasks == {"nothing": ()}


# ── Errors ───────────────────────────────────────────────────────

def test_duplicate_task():
    with pytest.raises(DuplicateTask):
        parse(
            """
            tasks:
              build:
                - task: a
              build:
                - task: b
            """
        )


def test_unknown_step_kind():
    with pytest.raises(UnknownStepKind):
        parse(
            """
            tasks:
              build:
                - frobnicate: {}
            """
        )


def test_unknown_variable_in_step():
    with pytest.raises(UnknownVariable):
        parse(
            """
            tasks:
              package:
                - tag: {source: "${MISSING}", as: x}
            """
        )


@pytest.mark.parametrize(
    "body",
    [
        "- run: {image: alpine}",
        "- run: {image: alpine, command: []}",
        "- run: {image: alpine, command: [x], colour: red}",
        "- run: {image: alpine, command: [x], expect: {stdout_matches: '('}}",
        "- run: {image: alpine, command: [x], binds: [nocolon]}",
        "- wrap: {directory: dist}",
        "- wrap: {directory: dist, as: x, config: {volumes: [/d]}}",
        "- wrap: {directory: dist, as: 'Not Valid'}",
        "- task: {name: 'Bad Name'}",
        "- {run: {image: a, command: [x]}, task: b}",
        "- just a string",
    ],
)
def test_schema_violations(body):
    with pytest.raises(ControlSyntaxError):
        ControlParser.parse_control(f"tasks:\n  t:\n    {body}\n".encode(), {})


def test_syntax_errors_carry_a_line_number():
    text = b"tasks:\n  ok:\n    - task: a\n  bad:\n    - run: {image: alpine}\n"
    with pytest.raises(ControlSyntaxError) as info:
        ControlParser.parse_control(text, {})
    assert info.value.line == 5
    assert str(info.value).startswith("line 5:")


def test_malformed_yaml():
    with pytest.raises(ControlSyntaxError) as info:
        ControlParser.parse_control(b"tasks:\n  a: [\n", {})
    assert info.value.line is not None


@pytest.mark.parametrize(
    "text",
    [b"- just a list\n", b"jobs: {}\n", b"tasks: [a, b]\n", b"tasks:\n  UPPER: []\n"],
)
def test_bad_top_level(text):
    with pytest.raises(ControlSyntaxError):
        ControlParser.parse_control(text, {})


def test_parse_errors_exit_with_two():
    assert ControlSyntaxError("x").exit_code == 2
    assert DuplicateTask("x").exit_code == 2
