"""
donning – Executors
======================
The container-execution boundary.  Every executor implements

    execute(request: ExecRequest) -> ExecResult

* ``HostExecutor`` runs the command as a plain host subprocess inside a
  fresh scratch directory.  Guest paths are translated to host paths
  through the request's binds.  **It does not isolate anything**: the
  image field is ignored and the command sees the host's tools.  Use it
  for tests and trusted local builds only.
* ``RuntimeBridgeExecutor`` shells out to an OCI-compatible runtime CLI
  (``docker``, ``podman``, ...) with a ``run --rm`` argv.

Both drain stdout and stderr concurrently with the process and map
signal termination to exit code 128 + signal.
"""

from __future__ import annotations

import logging
import os
import shutil
import signal
import subprocess
import tempfile
import time
from pathlib import Path
from typing import Optional, Protocol

from donning.entities.execution import ExecRequest, ExecResult
from donning.exceptions import (
    CommandNotFound,
    ExecTimeout,
    ImagePullFailed,
    RuntimeUnavailable,
    SpawnFailure,
)
from donning.utils import paths

logger = logging.getLogger(__name__)

# Exit status a docker-compatible CLI uses when it could not start the
# container at all (daemon error, image pull failure, bad flags).
RUNTIME_LAUNCH_FAILURE = 125


class Executor(Protocol):
    def execute(self, request: ExecRequest) -> ExecResult: ...


def _exit_code(returncode: int) -> int:
    return 128 - returncode if returncode < 0 else returncode


def _run(argv: list[str], cwd: Optional[str], env: Optional[dict[str, str]], timeout: float) -> ExecResult:
    """Spawn *argv* in its own process group and collect its output."""
    started = time.monotonic()
    try:
        process = subprocess.Popen(
            argv,
            cwd=cwd,
            env=env,
            stdin=subprocess.DEVNULL,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            start_new_session=True,
        )
    except FileNotFoundError as exc:
        raise CommandNotFound(f"command not found: {argv[0]!r}") from exc
    except OSError as exc:
        raise SpawnFailure(f"could not start {argv[0]!r}: {exc}") from exc

    try:
        stdout, stderr = process.communicate(timeout=timeout)
    except subprocess.TimeoutExpired:
        try:
            os.killpg(process.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        process.communicate()
        raise ExecTimeout(f"{argv[0]!r} did not finish within {timeout:g}s") from None

    return ExecResult(
        exit_code=_exit_code(process.returncode),
        stdout=stdout,
        stderr=stderr,
        wall_time=time.monotonic() - started,
    )


# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
#  Host executor
# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

class HostExecutor:
    """Runs builders as host subprocesses (non-isolating).

    For every run a scratch directory is created; its ``root/``
    subdirectory is the path-translation root for guest paths that no
    bind covers.  The scratch directory is removed afterwards.
    """

    def __init__(self, scratch_parent: Optional[str] = None) -> None:
        self._scratch_parent = scratch_parent

    def execute(self, request: ExecRequest) -> ExecResult:
        scratch = Path(tempfile.mkdtemp(prefix="donning-run-", dir=self._scratch_parent))
        try:
            translator = _PathTranslator(request, scratch / "root")
            cwd = translator.translate(request.workdir)
            os.makedirs(cwd, exist_ok=True)

            argv = [translator.translate_word(word) for word in request.argv]
            env = self._environment(request, scratch)
            logger.debug("[HostExecutor] cwd=%s argv=%s", cwd, argv)
            return _run(argv, cwd=cwd, env=env, timeout=request.timeout)
        finally:
            shutil.rmtree(scratch, ignore_errors=True)

    @staticmethod
    def _environment(request: ExecRequest, scratch: Path) -> dict[str, str]:
        tmp = scratch / "tmp"
        tmp.mkdir(exist_ok=True)
        env = {
            "PATH": os.environ.get("PATH", os.defpath),
            "HOME": str(scratch),
            "TMPDIR": str(tmp),
            "LANG": "C.UTF-8",
        }
        for entry in request.env:
            key, _, value = entry.partition("=")
            env[key] = value
        return env

    def __repr__(self) -> str:
        return "<HostExecutor>"


class _PathTranslator:
    """Maps guest paths onto bound host directories or the scratch root."""

    def __init__(self, request: ExecRequest, scratch_root: Path) -> None:
        # Longest guest prefix first so nested binds win.
        self._binds = sorted(request.binds, key=lambda b: len(b.guest), reverse=True)
        self._scratch_root = scratch_root

    def _match(self, guest_path: str):
        for bind in self._binds:
            if guest_path == bind.guest or paths.contained_in(guest_path, paths.as_prefix(bind.guest)):
                return bind
        return None

    def translate(self, guest_path: str) -> str:
        bind = self._match(guest_path)
        if bind is None:
            return str(self._scratch_root) + guest_path
        remainder = guest_path[len(bind.guest):] if bind.guest != paths.ROOT else guest_path
        return str(Path(bind.host)) + remainder

    def translate_word(self, word: str) -> str:
        """Rewrite an argv word that names a path under a bind.

        Under a root ("/") bind the word is rewritten only if the
        translated path exists, so host tools stay reachable.
        """
        if not word.startswith("/"):
            return word
        bind = self._match(word)
        if bind is None:
            return word
        translated = self.translate(word)
        if bind.guest == paths.ROOT and not os.path.lexists(translated):
            return word
        return translated


# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
#  Runtime bridge
# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

class RuntimeBridgeExecutor:
    """Delegates to an external runtime CLI such as ``docker`` or ``podman``.

    argv template::

        <binary> run --rm [-v host:guest]... -w <workdir> [-e K=V]...
                 [--entrypoint <e0>] <repository>:<version>
                 [<e1>...] <command words>
    """

    def __init__(self, binary: str) -> None:
        self.binary: str = binary

    def build_argv(self, request: ExecRequest) -> list[str]:
        if request.image is None:
            raise ValueError("the runtime bridge needs an image to run")
        argv = [self.binary, "run", "--rm"]
        for bind in request.binds:
            argv += ["-v", f"{bind.host}:{bind.guest}"]
        argv += ["-w", request.workdir]
        for entry in request.env:
            argv += ["-e", entry]
        entry_rest: list[str] = []
        if request.entrypoint:
            argv += ["--entrypoint", request.entrypoint[0]]
            entry_rest = list(request.entrypoint[1:])
        argv.append(str(request.image))
        return argv + entry_rest + list(request.command)

    def execute(self, request: ExecRequest) -> ExecResult:
        resolved = shutil.which(self.binary)
        if resolved is None:
            raise RuntimeUnavailable(f"container runtime {self.binary!r} not found on PATH")
        argv = self.build_argv(request)
        argv[0] = resolved
        logger.debug("[RuntimeBridge] argv=%s", argv)
        result = _run(argv, cwd=None, env=None, timeout=request.timeout)
        if result.exit_code == RUNTIME_LAUNCH_FAILURE:
            raise ImagePullFailed(
                f"{self.binary} could not start {request.image}: {result.stderr_text.strip()}"
            )
        return result

    def __repr__(self) -> str:
        return f"<RuntimeBridgeExecutor binary={self.binary!r}>"


def make_executor(runtime: Optional[str]) -> Executor:
    """Host executor when *runtime* is empty, else the runtime bridge."""
    if runtime:
        return RuntimeBridgeExecutor(runtime)
    return HostExecutor()
