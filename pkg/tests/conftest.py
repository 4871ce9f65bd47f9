"""Shared fixtures and the hypothesis ``ci`` profile."""

from __future__ import annotations

import os
import stat
from pathlib import Path
from typing import Mapping, Union

import pytest
from hypothesis import HealthCheck, settings

from donning.services.executors import HostExecutor
from donning.services.image_store import ImageStore

settings.register_profile(
    "ci",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture
def store(tmp_path: Path) -> ImageStore:
    return ImageStore(tmp_path / "store")


@pytest.fixture(scope="session")
def shared_store(tmp_path_factory) -> ImageStore:
    """One store for property tests; content addressing makes sharing safe."""
    return ImageStore(tmp_path_factory.mktemp("shared") / "store")


@pytest.fixture
def workdir(tmp_path: Path) -> Path:
    path = tmp_path / "work"
    path.mkdir()
    return path


@pytest.fixture
def host_executor(tmp_path: Path) -> HostExecutor:
    scratch = tmp_path / "scratch"
    scratch.mkdir()
    return HostExecutor(scratch_parent=str(scratch))


def write_tree(root: Path, files: Mapping[str, Union[str, bytes]], executable: tuple[str, ...] = ()) -> Path:
    """Create *files* (relative name -> content) under *root*."""
    for name, content in files.items():
        target = root / name
        target.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(content, str):
            content = content.encode("utf-8")
        target.write_bytes(content)
        if name in executable:
            target.chmod(target.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    return root
