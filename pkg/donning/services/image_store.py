"""
donning – Image Store
========================
Content-addressed persistence of layers and image configs, the tag
table, union resolution over a layer stack, squashing, layer donning
(``wrap``), linearisation of legacy parent chains and export / import
of images in a plain directory layout.

On-disk layout::

    <root>/blobs/sha256/<hex>          layer and config blobs
    <root>/tags/<repository>/<version> config digest hex + "\\n"
    <root>/lock                        advisory lock for tag writes

Blob writes go to a temporary file in the blob directory followed by an
atomic rename, so readers never observe a partial blob.  Every blob read
re-hashes the bytes; a corrupted blob is never returned, and putting
the same content again rewrites it.
"""

from __future__ import annotations

import contextlib
import fcntl
import logging
import os
import tempfile
from collections.abc import Iterable, Iterator, Mapping
from pathlib import Path
from typing import Any, Optional, Union

from donning.entities.image import OVERRIDE_FIELDS, Digest, ImageConfig, ImageRef, V1Image
from donning.entities.layerfs import Change, Directory, FileNode, Layer
from donning.exceptions import (
    CycleDetected,
    DanglingLayers,
    DigestMismatch,
    InvalidImageRef,
    MissingBlob,
    MissingParent,
    UnknownDigest,
    UnknownTag,
)
from donning.services.layer_codec import LayerCodec
from donning.services.layerfs_service import LayerFsService
from donning.utils import paths

logger = logging.getLogger(__name__)

INDEX_FILE = "index"


class ImageStore:
    """A content-addressed blob store plus a tag table rooted at *root*.

    Usage
    -----
    >>> store = ImageStore("/tmp/store")
    >>> digest = store.put_layer(layer)
    >>> store.get_layer(digest) == layer
    True
    """

    def __init__(self, root: Union[str, Path]) -> None:
        self.root: Path = Path(root)
        self._blob_dir: Path = self.root / "blobs" / "sha256"
        self._tag_dir: Path = self.root / "tags"
        self._lock_path: Path = self.root / "lock"
        self._blob_dir.mkdir(parents=True, exist_ok=True)
        self._tag_dir.mkdir(parents=True, exist_ok=True)
        self._lock_path.touch(exist_ok=True)
        # Decoded layers by digest; filled only after verification.
        self._layer_cache: dict[Digest, Layer] = {}

    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
    #  Blobs
    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

    def blob_path(self, digest: Digest) -> Path:
        return self._blob_dir / digest.hex

    def put_blob(self, data: bytes) -> Digest:
        """Store *data* under its digest.

        Re-putting an intact blob is a no-op; a stored copy that no
        longer hashes to its name is replaced.
        """
        digest = Digest.of(data)
        target = self.blob_path(digest)
        if target.exists():
            if Digest.of(target.read_bytes()) == digest:
                return digest
            logger.warning("[ImageStore] blob %s is corrupt on disk, rewriting it", digest.short)
        _atomic_write(target, data)
        logger.debug("[ImageStore] stored blob %s (%d bytes)", digest.short, len(data))
        return digest

    def get_blob(self, digest: Digest) -> bytes:
        """Return the verified bytes of *digest*.

        Raises
        ------
        UnknownDigest
            No blob with that digest exists.
        DigestMismatch
            The stored bytes no longer hash to *digest*.
        """
        try:
            data = self.blob_path(digest).read_bytes()
        except FileNotFoundError:
            raise UnknownDigest(f"no blob {digest}") from None
        actual = Digest.of(data)
        if actual != digest:
            raise DigestMismatch(f"blob {digest} is corrupt (hashes to {actual})")
        return data

    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
    #  Layers and configs
    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

    def put_layer(self, layer: Layer) -> Digest:
        digest = self.put_blob(LayerCodec.encode(layer))
        self._layer_cache.setdefault(digest, layer)
        return digest

    def get_layer(self, digest: Digest) -> Layer:
        cached = self._layer_cache.get(digest)
        if cached is not None:
            return cached
        layer = LayerCodec.decode(self.get_blob(digest))
        self._layer_cache[digest] = layer
        return layer

    def put_config(self, config: ImageConfig) -> Digest:
        return self.put_blob(config.to_bytes())

    def get_config(self, digest: Digest) -> ImageConfig:
        return ImageConfig.from_bytes(self.get_blob(digest))

    def layer_sizes(self, config: ImageConfig) -> list[tuple[Digest, int]]:
        """Stored blob size of every layer of *config*, base first."""
        sizes = []
        for digest in config.layers:
            try:
                sizes.append((digest, self.blob_path(digest).stat().st_size))
            except FileNotFoundError:
                raise UnknownDigest(f"no blob {digest}") from None
        return sizes

    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
    #  Tags
    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

    def _tag_path(self, ref: ImageRef) -> Path:
        return self._tag_dir.joinpath(*ref.repository.split("/"), ref.version)

    @contextlib.contextmanager
    def _tag_lock(self) -> Iterator[None]:
        """Exclusive advisory lock around a tag-table mutation."""
        with open(self._lock_path, "a+") as handle:
            fcntl.flock(handle.fileno(), fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(handle.fileno(), fcntl.LOCK_UN)

    def tag(self, ref: ImageRef, digest: Digest) -> None:
        """Bind *ref* to the config *digest*; any prior binding is replaced.

        Raises
        ------
        UnknownDigest
            *digest* names no stored config.
        DanglingLayers
            Some layer of the config cannot be resolved.
        DigestMismatch
            A layer blob is corrupt on disk.
        """
        config = self.get_config(digest)
        dangling = []
        for layer in config.layers:
            try:
                data = self.get_blob(layer)
            except UnknownDigest:
                dangling.append(layer)
                continue
            if layer not in self._layer_cache:
                self._layer_cache[layer] = LayerCodec.decode(data)
        if dangling:
            raise DanglingLayers(
                f"cannot tag {ref}: missing layers {', '.join(d.short for d in dangling)}"
            )
        path = self._tag_path(ref)
        if path.is_dir():
            raise InvalidImageRef(f"{ref} collides with a repository of the same name")
        with self._tag_lock():
            try:
                path.parent.mkdir(parents=True, exist_ok=True)
            except (FileExistsError, NotADirectoryError):
                raise InvalidImageRef(f"{ref} collides with an existing tag") from None
            _atomic_write(path, (digest.hex + "\n").encode("ascii"))
        logger.info("[ImageStore] tagged %s -> %s", ref, digest.short)

    def lookup_tag(self, ref: ImageRef) -> Digest:
        path = self._tag_path(ref)
        try:
            text = path.read_text(encoding="ascii")
        except (FileNotFoundError, NotADirectoryError, IsADirectoryError):
            raise UnknownTag(f"no image tagged {ref}") from None
        return Digest.parse(text)

    def config_for(self, ref: ImageRef) -> ImageConfig:
        """Shortcut: resolve *ref* and load its config."""
        return self.get_config(self.lookup_tag(ref))

    def list_tags(self) -> list[tuple[ImageRef, Digest]]:
        """Every tag binding, sorted by reference."""
        bindings = []
        for path in self._tag_dir.rglob("*"):
            if not path.is_file() or path.name.startswith("."):
                continue
            relative = path.relative_to(self._tag_dir)
            repository = "/".join(relative.parts[:-1])
            if not repository:
                continue
            ref = ImageRef(repository, relative.parts[-1])
            bindings.append((ref, Digest.parse(path.read_text(encoding="ascii"))))
        return sorted(bindings)

    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
    #  Union resolution
    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

    def resolve_file(self, config: ImageConfig, path: str) -> Optional[FileNode]:
        """The file visible at *path*, or ``None`` if absent.

        Layers are consulted from the topmost (last) to the base (first);
        the first layer that mentions *path* decides.
        """
        for digest in reversed(config.layers):
            change = self.get_layer(digest).get(path)
            if change is not None:
                return None if change.is_delete else change.node
        return None

    def enumerate(self, config: ImageConfig) -> Directory:
        """Materialise the union view of *config* as a directory.

        Raises
        ------
        PrefixCollision
            The stack yields both a file and a path beneath it.
        """
        return self._union([self.get_layer(d) for d in config.layers])

    @staticmethod
    def _union(layers: Iterable[Layer]) -> Directory:
        return LayerFsService.directory_from_layer(LayerFsService.merge_layers(layers))

    def squash(self, config: ImageConfig) -> ImageConfig:
        """Flatten *config* into one layer; runtime config is kept.

        A Put later cancelled by a Delete leaves no entry at all.
        """
        flat = Layer({f: Change.put(n) for f, n in self.enumerate(config).items()})
        digest = self.put_layer(flat)
        logger.info(
            "[ImageStore] squashed %d layers into %s", len(config.layers), digest.short
        )
        return config.with_layers([digest])

    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
    #  Layer donning
    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

    def wrap(
        self,
        base: Optional[ImageConfig],
        directory: Directory,
        at: str,
        overrides: Mapping[str, Any],
        ref: ImageRef,
    ) -> Digest:
        """Don *directory* as exactly one new layer on top of *base*.

        The directory is mounted at *at* (additions only), the layer is
        appended to the base's layer sequence, *overrides* replace
        runtime fields, and the new config is stored and tagged *ref*.
        Intact blobs are never modified.

        Returns
        -------
        Digest
            The digest of the new config.

        Raises
        ------
        PrefixCollision
            The donned files collide with files of the base.
        DanglingLayers
            A base layer cannot be resolved.
        """
        point = paths.normalize_mount_point(at)
        donned = Layer(
            {paths.join_mount(point, f): Change.put(n) for f, n in directory.items()}
        )
        base_config = base if base is not None else ImageConfig()
        try:
            base_layers = [self.get_layer(d) for d in base_config.layers]
        except UnknownDigest as exc:
            raise DanglingLayers(f"base image is incomplete: {exc}") from exc
        # Fail before writing anything if the union view is invalid.
        self._union([*base_layers, donned])

        layer_digest = self.put_layer(donned)
        config = base_config.with_layers([*base_config.layers, layer_digest])
        config = config.with_overrides(overrides)
        config_digest = self.put_config(config)
        self.tag(ref, config_digest)
        logger.info(
            "[ImageStore] wrapped %d files at %s as %s (%d layers)",
            len(directory), point, ref, len(config.layers),
        )
        return config_digest

    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
    #  Legacy parent chains
    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

    def linearize_v1(self, images: Iterable[V1Image], top: str) -> ImageConfig:
        """Turn a parent-linked chain into a base-first layer sequence.

        The parent links from *top* are followed to the root; each
        layer is stored and the meta maps are combined root first so
        that child keys override parent keys.

        Raises
        ------
        MissingParent
            The chain references an unknown id.
        CycleDetected
            The parent links loop.
        """
        by_id = {image.id: image for image in images}
        chain: list[V1Image] = []
        seen: set[str] = set()
        current: Optional[str] = top
        while current is not None:
            if current in seen:
                raise CycleDetected(f"parent chain of {top[:12]} loops at {current[:12]}")
            seen.add(current)
            image = by_id.get(current)
            if image is None:
                raise MissingParent(f"image {current[:12]} is not available")
            chain.append(image)
            current = image.parent
        chain.reverse()

        meta: dict[str, Any] = {}
        for image in chain:
            meta.update(image.meta)
        overrides = {k: v for k, v in meta.items() if k not in ("id", "parent")}
        unused = set(overrides) - set(OVERRIDE_FIELDS)
        if unused:
            logger.debug("[ImageStore] ignoring v1 meta keys: %s", ", ".join(sorted(unused)))
        layers = [self.put_layer(image.layer) for image in chain]
        return ImageConfig(layers=tuple(layers)).with_overrides(
            {k: v for k, v in overrides.items() if k not in unused}
        )

    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
    #  Export / import
    # ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

    def export_image(self, ref: ImageRef, dest: Union[str, Path]) -> Digest:
        """Write *ref*'s config and every layer it references to *dest*.

        Returns the exported config digest.
        """
        dest = Path(dest)
        config_digest = self.lookup_tag(ref)
        config = self.get_config(config_digest)
        blob_dir = dest / "blobs" / "sha256"
        blob_dir.mkdir(parents=True, exist_ok=True)
        for digest in (config_digest, *config.layers):
            (blob_dir / digest.hex).write_bytes(self.get_blob(digest))
        (dest / INDEX_FILE).write_text(f"{ref} {config_digest.hex}\n", encoding="utf-8")
        logger.info("[ImageStore] exported %s to %s", ref, dest)
        return config_digest

    def import_image(self, src: Union[str, Path]) -> ImageRef:
        """Admit an exported image after verifying every blob.

        Nothing is written to the store unless all blobs of all index
        entries verify.  Returns the first reference of the index.

        Raises
        ------
        MissingBlob
            The index or a referenced blob is missing.
        DigestMismatch
            A blob's bytes do not hash to its name.
        """
        src = Path(src)
        try:
            lines = (src / INDEX_FILE).read_text(encoding="utf-8").splitlines()
        except FileNotFoundError:
            raise MissingBlob(f"no index file in {src}") from None

        verified: dict[Digest, bytes] = {}
        bindings: list[tuple[ImageRef, Digest]] = []
        for line in filter(None, (ln.strip() for ln in lines)):
            ref_text, _, hex_text = line.partition(" ")
            ref, config_digest = ImageRef.parse(ref_text), Digest.parse(hex_text)
            config = ImageConfig.from_bytes(_read_verified(src, config_digest, verified))
            for digest in config.layers:
                LayerCodec.decode(_read_verified(src, digest, verified))
            bindings.append((ref, config_digest))
        if not bindings:
            raise MissingBlob(f"index in {src} lists no images")

        for data in verified.values():
            self.put_blob(data)
        for ref, digest in bindings:
            self.tag(ref, digest)
        logger.info("[ImageStore] imported %d image(s) from %s", len(bindings), src)
        return bindings[0][0]

    # ── Dunder ───────────────────────────────────────────────────

    def __repr__(self) -> str:
        return f"<ImageStore root={str(self.root)!r}>"


# ── Module helpers ───────────────────────────────────────────────

def _atomic_write(target: Path, data: bytes) -> None:
    """Write *data* to a temp file next to *target*, then rename over it."""
    fd, tmp_name = tempfile.mkstemp(prefix=".tmp-", dir=target.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, target)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp_name)
        raise


def _read_verified(src: Path, digest: Digest, verified: dict[Digest, bytes]) -> bytes:
    if digest in verified:
        return verified[digest]
    try:
        data = (src / "blobs" / "sha256" / digest.hex).read_bytes()
    except FileNotFoundError:
        raise MissingBlob(f"blob {digest} missing from {src}") from None
    actual = Digest.of(data)
    if actual != digest:
        raise DigestMismatch(f"blob {digest} in {src} was modified (hashes to {actual})")
    verified[digest] = data
    return data
