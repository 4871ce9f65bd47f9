"""Image store: blobs, tags, union resolution, squash, wrap, v1 chains, export / import."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from donning.entities.image import EPOCH_ZERO, Digest, ImageConfig, ImageRef, V1Image
from donning.entities.layerfs import DELETE, Change, Directory, FileNode, Layer
from donning.exceptions import (
    BadConfigBlob,
    CycleDetected,
    DanglingLayers,
    DigestMismatch,
    InvalidImageRef,
    MissingBlob,
    MissingParent,
    PrefixCollision,
    UnknownDigest,
    UnknownTag,
)
from donning.services.image_store import ImageStore
from donning.services.layer_codec import LayerCodec
from donning.services.layerfs_service import LayerFsService
from donning.utils import paths
from strategies import directories, fake_id, layer_stacks, layers, mount_points

A = FileNode.regular(b"a")
B = FileNode.regular(b"b")


def _stack(store: ImageStore, stack, **runtime) -> ImageConfig:
    return ImageConfig(layers=tuple(store.put_layer(l) for l in stack), **runtime)


def _folded(stack) -> Directory:
    """Reference union view: apply every layer base first."""
    d = Directory()
    for layer in stack:
        d = LayerFsService.apply(d, layer)
    return d


def _mentioned(stack) -> set[str]:
    return {path for layer in stack for path in layer}


# ── Blobs ────────────────────────────────────────────────────────

def test_put_layer_round_trip_and_idempotence(store):
    layer = Layer({"/x": Change.put(A)})
    first = store.put_layer(layer)
    second = store.put_layer(layer)
    assert first == second
    assert store.get_layer(first) == layer
    assert len(list(store.blob_path(first).parent.iterdir())) == 1


def test_blob_name_is_digest_of_encoding(store):
    layer = Layer({"/x": DELETE})
    digest = store.put_layer(layer)
    assert digest == Digest.of(LayerCodec.encode(layer))
    assert store.blob_path(digest).read_bytes() == LayerCodec.encode(layer)


def test_get_unknown_digest(store):
    with pytest.raises(UnknownDigest):
        store.get_layer(Digest.of(b"never stored"))


def test_corrupted_blob_is_never_returned(store):
    digest = store.put_layer(Layer({"/x": Change.put(A)}))
    path = store.blob_path(digest)
    data = bytearray(path.read_bytes())
    data[-1] ^= 0xFF
    path.write_bytes(bytes(data))

    reopened = ImageStore(store.root)
    with pytest.raises(DigestMismatch):
        reopened.get_layer(digest)
    assert DigestMismatch.exit_code == 3


def _corrupt(store: ImageStore, digest: Digest) -> None:
    path = store.blob_path(digest)
    path.write_bytes(path.read_bytes()[:-1])


def test_reputting_repairs_a_corrupted_blob(store):
    layer = Layer({"/app": Change.put(A)})
    digest = store.put_layer(layer)
    _corrupt(store, digest)

    reopened = ImageStore(store.root)
    assert reopened.put_layer(layer) == digest
    assert reopened.get_blob(digest) == LayerCodec.encode(layer)
    assert ImageStore(store.root).get_layer(digest) == layer


def test_wrap_over_a_corrupted_blob_tags_a_verified_image(store):
    directory = Directory({"/app": A})
    first = store.wrap(None, directory, "/", {}, ImageRef("app", "1"))
    (layer,) = store.get_config(first).layers
    _corrupt(store, layer)

    reopened = ImageStore(store.root)
    assert reopened.wrap(None, directory, "/", {}, ImageRef("app", "2")) == first
    assert ImageStore(store.root).resolve_file(reopened.config_for(ImageRef("app", "2")), "/app") == A


def test_tag_refuses_corrupted_layers(store):
    digest = store.put_layer(Layer({"/app": Change.put(A)}))
    config = store.put_config(ImageConfig(layers=(digest,)))
    _corrupt(store, digest)

    with pytest.raises(DigestMismatch):
        ImageStore(store.root).tag(ImageRef("broken"), config)
    assert store.list_tags() == []


# ── Configs ──────────────────────────────────────────────────────

def test_empty_config_is_canonical_json():
    assert ImageConfig().to_bytes() == (
        b'{"created":"1970-01-01T00:00:00Z","env":[],"exposed_ports":[],"layers":[]}'
    )


def test_config_round_trip_and_absent_fields(store):
    config = ImageConfig(cmd=("/factorizer",), env=("A=1",), exposed_ports=(80, 22, 80))
    digest = store.put_config(config)
    loaded = store.get_config(digest)
    assert loaded == config
    assert loaded.exposed_ports == (22, 80)
    doc = json.loads(loaded.to_bytes())
    assert "user" not in doc and "entrypoint" not in doc
    assert doc["created"] == EPOCH_ZERO


def test_config_rejects_unknown_override():
    with pytest.raises(BadConfigBlob):
        ImageConfig().with_overrides({"volumes": ["/data"]})


def test_config_rejects_garbage():
    with pytest.raises(BadConfigBlob):
        ImageConfig.from_bytes(b"LDL1\x00\x00\x00\x00")


# ── References and tags ──────────────────────────────────────────

@pytest.mark.parametrize(
    "text, expected",
    [
        ("alpine", ImageRef("alpine", "latest")),
        ("alpine:3.3", ImageRef("alpine", "3.3")),
        ("mulled/tmux:2.1--1", ImageRef("mulled/tmux", "2.1--1")),
    ],
)
def test_image_ref_parse(text, expected):
    assert ImageRef.parse(text) == expected
    assert ImageRef.parse(str(expected)) == expected


@pytest.mark.parametrize("text", ["Alpine", "a:b:c", "a//b", "alpine:", "-x", "alpine:.hidden"])
def test_image_ref_rejects(text):
    with pytest.raises(InvalidImageRef):
        ImageRef.parse(text)


def test_tag_and_lookup(store):
    digest = store.put_config(_stack(store, [Layer({"/x": Change.put(A)})]))
    ref = ImageRef("demo/blog", "v1")
    store.tag(ref, digest)
    assert store.lookup_tag(ref) == digest
    assert (store.root / "tags" / "demo" / "blog" / "v1").read_text() == digest.hex + "\n"


def test_lookup_absent_tag(store):
    with pytest.raises(UnknownTag):
        store.lookup_tag(ImageRef.parse("absent/repo:latest"))


def test_two_refs_share_one_config(store):
    digest = store.put_config(ImageConfig(cmd=("/bin/sh",)))
    store.tag(ImageRef("firefox"), digest)
    store.tag(ImageRef("browser", "stable"), digest)
    assert store.lookup_tag(ImageRef("firefox")) == store.lookup_tag(ImageRef("browser", "stable"))
    assert store.list_tags() == sorted([(ImageRef("browser", "stable"), digest), (ImageRef("firefox"), digest)])


def test_tag_overwrite_is_last_write_wins(store):
    ref = ImageRef("app")
    first = store.put_config(ImageConfig(cmd=("one",)))
    second = store.put_config(ImageConfig(cmd=("two",)))
    store.tag(ref, first)
    store.tag(ref, second)
    assert store.lookup_tag(ref) == second


def test_tag_refuses_dangling_layers(store):
    digest = store.put_config(ImageConfig(layers=(Digest.of(b"missing layer"),)))
    with pytest.raises(DanglingLayers):
        store.tag(ImageRef("broken"), digest)
    assert store.list_tags() == []


def test_tag_unknown_config(store):
    with pytest.raises(UnknownDigest):
        store.tag(ImageRef("nothing"), Digest.of(b"no config"))


def test_tag_repository_and_version_cannot_collide(store):
    digest = store.put_config(ImageConfig())
    store.tag(ImageRef("a", "b"), digest)
    with pytest.raises(InvalidImageRef):
        store.tag(ImageRef("a/b", "latest"), digest)


# ── Union resolution ─────────────────────────────────────────────

def test_resolve_file_topmost_layer_wins(store):
    config = _stack(store, [Layer({"/x": Change.put(B)}), Layer({"/x": Change.put(A)})])
    assert store.resolve_file(config, "/x") == A


def test_resolve_file_delete_hides_lower_put(store):
    config = _stack(store, [Layer({"/x": Change.put(B)}), Layer({"/x": DELETE})])
    assert store.resolve_file(config, "/x") is None
    assert store.enumerate(config) == Directory()


def test_resolve_unmentioned_path_is_absent(store):
    config = _stack(store, [Layer({"/x": Change.put(A)})])
    assert store.resolve_file(config, "/nowhere") is None


@settings(max_examples=200)
@given(layer_stacks)
def test_enumerate_matches_folded_apply(shared_store, stack):
    config = _stack(shared_store, stack)
    expected = _folded(stack)
    assert shared_store.enumerate(config) == expected
    for path in _mentioned(stack):
        assert shared_store.resolve_file(config, path) == expected.get(path)


# ── Squash ───────────────────────────────────────────────────────

@settings(max_examples=200)
@given(layer_stacks)
def test_squash_preserves_every_path(shared_store, stack):
    config = _stack(shared_store, stack, cmd=("/run",), env=("K=V",))
    squashed = shared_store.squash(config)
    assert len(squashed.layers) == 1
    assert (squashed.cmd, squashed.env) == (config.cmd, config.env)
    for path in _mentioned(stack):
        assert shared_store.resolve_file(squashed, path) == shared_store.resolve_file(config, path)


def test_squash_cancels_put_then_delete(store):
    config = _stack(
        store,
        [
            Layer({"/bin/app": Change.put(A)}),
            Layer({"/tmp/cache": Change.put(B)}),
            Layer({"/tmp/cache": DELETE}),
        ],
    )
    flat = store.get_layer(store.squash(config).layers[0])
    assert "/tmp/cache" not in flat
    assert flat == Layer({"/bin/app": Change.put(A)})


# ── Wrap ─────────────────────────────────────────────────────────

@settings(max_examples=100)
@given(st.lists(layers, max_size=4), directories, mount_points)
def test_wrap_adds_exactly_one_layer(shared_store, stack, directory, point):
    base = _stack(shared_store, stack)
    before = {d: shared_store.blob_path(d).read_bytes() for d in base.layers}

    digest = shared_store.wrap(base, directory, point, {}, ImageRef("test/wrap"))
    wrapped = shared_store.get_config(digest)

    assert len(wrapped.layers) == len(base.layers) + 1
    assert wrapped.layers[:-1] == base.layers
    assert {d: shared_store.blob_path(d).read_bytes() for d in base.layers} == before
    for f, node in directory.items():
        assert shared_store.resolve_file(wrapped, paths.join_mount(point, f)) == node
    assert shared_store.lookup_tag(ImageRef("test/wrap")) == digest


def test_wrap_without_base_gives_one_layer(store):
    directory = Directory({"/factorizer": FileNode.regular(b"\x7fELF", executable=True)})
    digest = store.wrap(None, directory, "/", {"cmd": ["/factorizer"]}, ImageRef("test/factorization"))
    config = store.get_config(digest)
    assert len(config.layers) == 1
    assert config.cmd == ("/factorizer",)
    assert store.resolve_file(config, "/factorizer").executable


def test_wrap_keeps_base_runtime_config_unless_overridden(store):
    base = ImageConfig(cmd=("/bin/sh",), user="nobody")
    digest = store.wrap(base, Directory({"/app": A}), "/srv", {"cmd": "/srv/app"}, ImageRef("app"))
    config = store.get_config(digest)
    assert config.cmd == ("/srv/app",)
    assert config.user == "nobody"
    assert store.resolve_file(config, "/srv/app") == A


@pytest.mark.parametrize(
    "overrides, field, expected",
    [
        ({"env": "A=1"}, "env", ("A=1",)),
        ({"env": ["A=1", "B=2"]}, "env", ("A=1", "B=2")),
        ({"entrypoint": "/bin/sh"}, "entrypoint", ("/bin/sh",)),
        ({"exposed_ports": 8080}, "exposed_ports", (8080,)),
        ({"exposed_ports": "80"}, "exposed_ports", (80,)),
    ],
)
def test_scalar_override_is_a_single_entry(store, overrides, field, expected):
    digest = store.wrap(None, Directory({"/app": A}), "/", overrides, ImageRef("app"))
    assert getattr(store.get_config(digest), field) == expected


def test_wrap_collision_writes_no_tag(store):
    base = store.get_config(store.wrap(None, Directory({"/a": A}), "/", {}, ImageRef("base")))
    with pytest.raises(PrefixCollision):
        store.wrap(base, Directory({"/b": B}), "/a", {}, ImageRef("broken"))
    with pytest.raises(UnknownTag):
        store.lookup_tag(ImageRef("broken"))


def test_wrap_with_incomplete_base(store):
    base = ImageConfig(layers=(Digest.of(b"gone"),))
    with pytest.raises(DanglingLayers):
        store.wrap(base, Directory({"/a": A}), "/", {}, ImageRef("x"))


# ── Legacy parent chains ─────────────────────────────────────────

def _v1_resolve(by_id: dict, image_id: str, path: str):
    """Recursive reference: own layer first, then the parent chain."""
    image = by_id[image_id]
    change = image.layer.get(path)
    if change is not None:
        return None if change.is_delete else change.node
    if image.parent is None:
        return None
    return _v1_resolve(by_id, image.parent, path)


def _chain(stack, salt: str = "") -> list[V1Image]:
    return [
        V1Image(id=fake_id(i, salt), layer=layer, parent=fake_id(i - 1, salt) if i else None)
        for i, layer in enumerate(stack)
    ]


def test_linearize_application_java_ubuntu(store):
    ubuntu = V1Image(fake_id(0), Layer({"/bin/sh": Change.put(A)}), meta={"cmd": ["/bin/sh"]})
    java = V1Image(fake_id(1), Layer({"/usr/bin/java": Change.put(B)}), parent=ubuntu.id, meta={"env": ["JAVA=1"]})
    app = V1Image(
        fake_id(2),
        Layer({"/app.jar": Change.put(A)}),
        parent=java.id,
        meta={"cmd": ["java", "-jar", "/app.jar"], "author": "ignored"},
    )
    config = store.linearize_v1({app, ubuntu, java}, app.id)
    assert config.layers == tuple(Digest.of(LayerCodec.encode(i.layer)) for i in (ubuntu, java, app))
    assert config.cmd == ("java", "-jar", "/app.jar")
    assert config.env == ("JAVA=1",)


def test_linearize_parentless_image(store):
    image = V1Image(fake_id(0), Layer({"/x": Change.put(A)}))
    assert len(store.linearize_v1([image], image.id).layers) == 1


def test_linearize_missing_parent(store):
    orphan = V1Image(fake_id(1), Layer(), parent=fake_id(0))
    with pytest.raises(MissingParent):
        store.linearize_v1([orphan], orphan.id)


def test_linearize_cycle(store):
    a = V1Image(fake_id(0), Layer(), parent=fake_id(1))
    b = V1Image(fake_id(1), Layer(), parent=fake_id(0))
    with pytest.raises(CycleDetected):
        store.linearize_v1([a, b], a.id)


@settings(max_examples=200)
@given(st.lists(layers, min_size=1, max_size=5))
def test_linearized_chain_resolves_like_parent_walk(shared_store, stack):
    images = _chain(stack)
    by_id = {i.id: i for i in images}
    top = images[-1].id
    config = shared_store.linearize_v1(reversed(images), top)
    assert len(config.layers) == len(stack)
    for path in _mentioned(stack):
        assert shared_store.resolve_file(config, path) == _v1_resolve(by_id, top, path)


# ── Export / import ──────────────────────────────────────────────

@pytest.fixture
def exported(store, tmp_path):
    base = store.wrap(None, Directory({"/bin/sh": A}), "/", {}, ImageRef("base"))
    digest = store.wrap(
        store.get_config(base), Directory({"/hello": B}), "/", {"cmd": ["/hello"]}, ImageRef("demo/hello", "v1")
    )
    dest = tmp_path / "export"
    assert store.export_image(ImageRef("demo/hello", "v1"), dest) == digest
    return dest, digest


def test_export_layout(store, exported):
    dest, digest = exported
    config = store.get_config(digest)
    assert (dest / "index").read_text() == f"demo/hello:v1 {digest.hex}\n"
    names = {p.name for p in (dest / "blobs" / "sha256").iterdir()}
    assert names == {digest.hex, *(d.hex for d in config.layers)}


def test_import_round_trip(tmp_path, store, exported):
    dest, digest = exported
    fresh = ImageStore(tmp_path / "other")
    ref = fresh.import_image(dest)
    assert ref == ImageRef("demo/hello", "v1")
    assert fresh.lookup_tag(ref) == digest
    assert fresh.get_config(digest).layers == store.get_config(digest).layers


def test_import_rejects_tampered_blob(tmp_path, store, exported):
    dest, digest = exported
    layer_blob = dest / "blobs" / "sha256" / store.get_config(digest).layers[-1].hex
    data = bytearray(layer_blob.read_bytes())
    data[len(data) // 2] ^= 0x01
    layer_blob.write_bytes(bytes(data))

    fresh = ImageStore(tmp_path / "other")
    with pytest.raises(DigestMismatch):
        fresh.import_image(dest)
    assert fresh.list_tags() == []
    assert list((fresh.root / "blobs" / "sha256").iterdir()) == []


def test_import_missing_blob(tmp_path, store, exported):
    dest, digest = exported
    (dest / "blobs" / "sha256" / store.get_config(digest).layers[0].hex).unlink()
    with pytest.raises(MissingBlob):
        ImageStore(tmp_path / "other").import_image(dest)


def test_export_unknown_ref(store, tmp_path):
    with pytest.raises(UnknownTag):
        store.export_image(ImageRef("nope"), tmp_path / "x")
