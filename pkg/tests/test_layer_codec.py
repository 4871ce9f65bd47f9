"""LDL1 encoding, decoding and digests."""

from __future__ import annotations

import struct

import pytest
from hypothesis import given, settings

from donning.entities.image import Digest
from donning.entities.layerfs import DELETE, Change, FileNode, Layer
from donning.exceptions import (
    BadMagic,
    BlobFormatError,
    DuplicatePath,
    TrailingBytes,
    TruncatedBlob,
    UnknownKind,
    UnsortedEntries,
)
from donning.services.layer_codec import LayerCodec
from strategies import layers


def _entry(path: bytes, kind: int, payload: bytes = b"") -> bytes:
    out = struct.pack(">H", len(path)) + path + bytes([kind])
    if kind in (1, 2):
        out += struct.pack(">Q", len(payload)) + payload
    elif kind == 3:
        out += struct.pack(">H", len(payload)) + payload
    return out


def _blob(*entries: bytes) -> bytes:
    return b"LDL1" + struct.pack(">I", len(entries)) + b"".join(entries)


def test_empty_layer_is_eight_bytes():
    assert LayerCodec.encode(Layer()) == b"LDL1\x00\x00\x00\x00"


def test_entries_sorted_by_path_bytes():
    layer = Layer({"/b": DELETE, "/a": DELETE})
    assert LayerCodec.encode(layer) == _blob(_entry(b"/a", 0), _entry(b"/b", 0))


def test_every_kind_byte():
    layer = Layer(
        {
            "/del": DELETE,
            "/reg": Change.put(FileNode.regular(b"hi")),
            "/exe": Change.put(FileNode.regular(b"#!", executable=True)),
            "/lnk": Change.put(FileNode.symlink("reg")),
        }
    )
    assert LayerCodec.encode(layer) == _blob(
        _entry(b"/del", 0),
        _entry(b"/exe", 2, b"#!"),
        _entry(b"/lnk", 3, b"reg"),
        _entry(b"/reg", 1, b"hi"),
    )


def test_encoding_ignores_insertion_order():
    one = Layer({"/x": DELETE, "/y": Change.put(FileNode.regular(b"1"))})
    two = Layer({"/y": Change.put(FileNode.regular(b"1")), "/x": DELETE})
    assert LayerCodec.encode(one) == LayerCodec.encode(two)


@settings(max_examples=300)
@given(layers)
def test_decode_inverts_encode(layer):
    data = LayerCodec.encode(layer)
    assert LayerCodec.decode(data) == layer
    assert LayerCodec.encode(LayerCodec.decode(data)) == data


@pytest.mark.parametrize(
    "data, error",
    [
        (b"XXXX\x00\x00\x00\x00", BadMagic),
        (b"LDL", TruncatedBlob),
        (b"LDL1\x00\x00\x00\x01", TruncatedBlob),
        (_blob(_entry(b"/b", 0), _entry(b"/a", 0)), UnsortedEntries),
        (_blob(_entry(b"/a", 0), _entry(b"/a", 0)), DuplicatePath),
        (_blob(_entry(b"/a", 7)), UnknownKind),
        (_blob(_entry(b"relative", 0)), BlobFormatError),
        (_blob(_entry(b"/l", 3, b"")), BlobFormatError),
        (_blob(_entry(b"/a", 0)) + b"\x00", TrailingBytes),
    ],
)
def test_decode_rejects_non_canonical_blobs(data, error):
    with pytest.raises(error):
        LayerCodec.decode(data)


def test_digest_known_vectors():
    assert LayerCodec.digest(b"").hex == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    assert LayerCodec.digest(b"abc").hex == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"


def test_digest_parse_and_render():
    digest = Digest.of(b"abc")
    assert str(digest).startswith("sha256:")
    assert Digest.parse(str(digest)) == digest
    assert Digest.parse(digest.hex) == digest
    assert digest.short == digest.hex[:12]
