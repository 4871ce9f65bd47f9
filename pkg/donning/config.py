"""
donning – Application Configuration
======================================
OO Config class that loads all environment variables once and exposes
them as class-level attributes. Uses python-dotenv so a .env file in
the working directory is picked up automatically.
"""

import logging
import os

from dotenv import load_dotenv

load_dotenv()


class Config:
    """Centralised, immutable application configuration.

    All values are read from environment variables at import time.
    Downstream code should access them as ``Config.STORE_ROOT``, etc.
    Command-line flags always take precedence over these values.
    """

    # ── Store ────────────────────────────────────────────────────
    STORE_ROOT: str = os.path.expanduser(
        os.getenv("DONNING_STORE", "~/.donning/store")
    )

    # ── Execution ────────────────────────────────────────────────
    # Empty means "use the host executor".
    RUNTIME: str = os.getenv("DONNING_RUNTIME", "")
    EXEC_TIMEOUT_SECS: str = os.getenv("DONNING_TIMEOUT", "3600")
    SOURCE_MOUNT: str = "/source"

    # ── Control files ────────────────────────────────────────────
    CONTROL_FILE: str = "donning.tasks"
    DEFAULT_VERSION: str = "latest"

    # ── Logging ──────────────────────────────────────────────────
    LOG_LEVEL: str = os.getenv("DONNING_LOG_LEVEL", "WARNING").upper()

    # Prevent instantiation – this is a pure namespace.
    def __init__(self) -> None:
        raise RuntimeError("Config is a static namespace and should not be instantiated.")

    @classmethod
    def exec_timeout(cls) -> float:
        """Executor timeout in seconds, parsed from ``EXEC_TIMEOUT_SECS``."""
        return float(cls.EXEC_TIMEOUT_SECS)

    @classmethod
    def validate(cls) -> None:
        """Raise early if a variable holds a value we cannot use."""
        problems: list[str] = []

        try:
            if cls.exec_timeout() <= 0:
                problems.append("DONNING_TIMEOUT must be positive")
        except ValueError:
            problems.append(f"DONNING_TIMEOUT is not a number: {cls.EXEC_TIMEOUT_SECS!r}")

        if not isinstance(logging.getLevelName(cls.LOG_LEVEL), int):
            problems.append(f"DONNING_LOG_LEVEL is not a log level: {cls.LOG_LEVEL!r}")

        if problems:
            raise EnvironmentError(
                f"Invalid environment configuration: {'; '.join(problems)}"
            )

    def __repr__(self) -> str:
        return (
            f"<Config STORE_ROOT={self.STORE_ROOT!r} "
            f"RUNTIME={self.RUNTIME!r}>"
        )
