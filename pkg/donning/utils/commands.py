"""
donning – Command Blueprints
===============================
A small blueprint layer over ``argparse``: each controller module
declares a ``CommandBlueprint`` and registers its sub-commands with the
``@bp.command`` decorator; ``app.create_app`` mounts every blueprint on
one parser.  Parse errors raise ``UsageError`` instead of exiting.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from donning.config import Config
from donning.exceptions import UsageError
from donning.services.image_store import ImageStore

Handler = Callable[["Invocation"], int]


class UsageParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


@dataclass(frozen=True)
class Arg:
    """Positional flags plus keyword options for ``add_argument``."""

    flags: tuple[str, ...]
    options: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def of(cls, *flags: str, **options: Any) -> "Arg":
        return cls(flags, options)


STORE_ARG = Arg.of("--store", metavar="DIR", help="store root (default: $DONNING_STORE or ~/.donning/store)")
RUNTIME_ARG = Arg.of("--runtime", metavar="BIN", help="container runtime CLI (default: host executor)")


@dataclass(frozen=True)
class Invocation:
    """A parsed command line: the command name, its arguments, its handler."""

    command: str
    args: argparse.Namespace
    handler: Handler

    @property
    def verbose(self) -> bool:
        return bool(getattr(self.args, "verbose", False))

    def store(self) -> ImageStore:
        return ImageStore(getattr(self.args, "store", None) or Config.STORE_ROOT)

    def runtime(self) -> str:
        value = getattr(self.args, "runtime", None)
        return Config.RUNTIME if value is None else value


@dataclass
class _Command:
    name: str
    help: str
    args: tuple[Arg, ...]
    handler: Handler


class CommandBlueprint:
    """A named group of sub-commands.

    Usage
    -----
    >>> image_bp = CommandBlueprint("images")
    >>> @image_bp.command("images", help="list tags", args=[STORE_ARG])
    ... def list_images(inv): ...
    """

    def __init__(self, name: str) -> None:
        self.name = name
        self._commands: list[_Command] = []

    def command(self, name: str, help: str = "", args: Optional[list[Arg]] = None) -> Callable[[Handler], Handler]:
        def decorator(handler: Handler) -> Handler:
            self._commands.append(_Command(name, help, tuple(args or ()), handler))
            return handler

        return decorator

    @property
    def command_names(self) -> list[str]:
        return [c.name for c in self._commands]

    def register(self, subparsers: argparse._SubParsersAction) -> None:
        for cmd in self._commands:
            parser = subparsers.add_parser(cmd.name, help=cmd.help, description=cmd.help)
            for arg in cmd.args:
                parser.add_argument(*arg.flags, **arg.options)
            parser.set_defaults(handler=cmd.handler)

    def __repr__(self) -> str:
        return f"<CommandBlueprint {self.name} commands={self.command_names}>"
