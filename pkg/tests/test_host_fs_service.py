"""Reading host trees into directories and materialising images."""

from __future__ import annotations

import os
import stat
import tempfile
from pathlib import Path

import pytest
from hypothesis import given, settings

from donning.entities.image import ImageConfig, ImageRef
from donning.entities.layerfs import DELETE, Change, Directory, FileNode, Layer
from donning.services.host_fs_service import HostFsService
from donning.services.layerfs_service import LayerFsService
from conftest import write_tree
from strategies import layer_stacks


def test_read_directory(tmp_path):
    write_tree(tmp_path, {"bin/run": "#!/bin/sh\n", "etc/motd": "hi"}, executable=("bin/run",))
    os.symlink("../etc/motd", tmp_path / "bin" / "motd")
    os.symlink("etc", tmp_path / "etc-link")

    directory = HostFsService.read_directory(tmp_path)
    assert directory == Directory(
        {
            "/bin/run": FileNode.regular(b"#!/bin/sh\n", executable=True),
            "/bin/motd": FileNode.symlink("../etc/motd"),
            "/etc/motd": FileNode.regular(b"hi"),
            "/etc-link": FileNode.symlink("etc"),
        }
    )


def test_read_directory_skips_fifos(tmp_path, caplog):
    os.mkfifo(tmp_path / "pipe")
    assert HostFsService.read_directory(tmp_path) == Directory()
    assert "unsupported file type" in caplog.text


def test_read_directory_requires_directory(tmp_path):
    with pytest.raises(NotADirectoryError):
        HostFsService.read_directory(tmp_path / "missing")


def test_materialize_rootfs(store, tmp_path):
    config = ImageConfig(
        layers=(
            store.put_layer(Layer({"/a": Change.put(FileNode.regular(b"old")), "/keep": Change.put(FileNode.regular(b"k"))})),
            store.put_layer(
                Layer(
                    {
                        "/a": DELETE,
                        "/bin/run": Change.put(FileNode.regular(b"#!/bin/sh\necho hi\n", executable=True)),
                        "/bin/sh": Change.put(FileNode.symlink("/bin/busybox")),
                    }
                )
            ),
        )
    )
    dest = tmp_path / "rootfs"
    HostFsService.materialize_rootfs(store, config, dest)

    assert not (dest / "a").exists()
    assert (dest / "keep").read_bytes() == b"k"
    assert os.stat(dest / "bin" / "run").st_mode & stat.S_IXUSR
    assert os.readlink(dest / "bin" / "sh") == "/bin/busybox"
    assert LayerFsService.diff(HostFsService.read_directory(dest), store.enumerate(config)) == Layer()


def test_materialize_rootfs_requires_empty_destination(store, tmp_path):
    write_tree(tmp_path / "dest", {"occupied": "x"})
    with pytest.raises(FileExistsError):
        HostFsService.materialize_rootfs(store, ImageConfig(), tmp_path / "dest")


@settings(max_examples=50)
@given(layer_stacks)
def test_materialize_then_read_back_equals_enumerate(shared_store, stack):
    config = ImageConfig(layers=tuple(shared_store.put_layer(l) for l in stack))
    with tempfile.TemporaryDirectory() as scratch:
        dest = Path(scratch) / "rootfs"
        HostFsService.materialize_rootfs(shared_store, config, dest)
        assert HostFsService.read_directory(dest) == shared_store.enumerate(config)


def test_wrapped_image_materializes(store, tmp_path):
    digest = store.wrap(None, Directory({"/srv/app": FileNode.regular(b"x")}), "/", {}, ImageRef("app"))
    dest = tmp_path / "out"
    HostFsService.materialize_rootfs(store, store.get_config(digest), dest)
    assert (dest / "srv" / "app").read_bytes() == b"x"
