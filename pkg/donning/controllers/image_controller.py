"""
donning – Image Controller
=============================
Commands that read or reshape stored images:

    donning images                 list every tag and its config digest
    donning inspect REF            config digest, layers (base first), runtime config
    donning squash REF --as REF    flatten into a single layer, keep runtime config
    donning export REF -o DIR      write the image in the directory layout
    donning import DIR             verify and admit an exported image
"""

from __future__ import annotations

from donning.entities.image import ImageRef
from donning.utils.commands import STORE_ARG, Arg, CommandBlueprint, Invocation

image_bp = CommandBlueprint("images")

_REF = dict(type=ImageRef.parse, metavar="REF")


@image_bp.command("images", help="list tagged images", args=[STORE_ARG])
def list_images(inv: Invocation) -> int:
    for ref, digest in inv.store().list_tags():
        print(f"{ref}  {digest}")
    return 0


@image_bp.command("inspect", help="show an image's layers and config", args=[Arg.of("ref", **_REF), STORE_ARG])
def inspect(inv: Invocation) -> int:
    store = inv.store()
    digest = store.lookup_tag(inv.args.ref)
    config = store.get_config(digest)
    print(f"image:   {inv.args.ref}")
    print(f"digest:  {digest}")
    print(f"layers:  {len(config.layers)}")
    for layer_digest, size in store.layer_sizes(config):
        print(f"  {layer_digest}  {size} bytes")
    for key, value in config.to_dict().items():
        if key in ("layers", "created"):
            continue
        print(f"{key}: {value}")
    return 0


@image_bp.command(
    "squash",
    help="flatten an image into a single layer",
    args=[Arg.of("ref", **_REF), Arg.of("--as", dest="as_ref", required=True, **_REF), STORE_ARG],
)
def squash(inv: Invocation) -> int:
    store = inv.store()
    squashed = store.squash(store.config_for(inv.args.ref))
    digest = store.put_config(squashed)
    store.tag(inv.args.as_ref, digest)
    print(f"{inv.args.as_ref}  {digest}")
    return 0


@image_bp.command(
    "export",
    help="export an image to a directory",
    args=[Arg.of("ref", **_REF), Arg.of("-o", "--output", required=True, metavar="DIR"), STORE_ARG],
)
def export(inv: Invocation) -> int:
    digest = inv.store().export_image(inv.args.ref, inv.args.output)
    print(f"exported {inv.args.ref}  {digest} -> {inv.args.output}")
    return 0


@image_bp.command("import", help="import an exported image", args=[Arg.of("source", metavar="DIR"), STORE_ARG])
def import_(inv: Invocation) -> int:
    store = inv.store()
    ref = store.import_image(inv.args.source)
    print(f"imported {ref}  {store.lookup_tag(ref)}")
    return 0
