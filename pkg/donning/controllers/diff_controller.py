"""
donning – Diff Controller
============================
    donning diff DIR_A DIR_B

Prints the layer that turns the tree under DIR_A into the tree under
DIR_B, one ``put`` / ``delete`` line per path, followed by the counts.
"""

from __future__ import annotations

from donning.services.host_fs_service import HostFsService
from donning.services.layerfs_service import LayerFsService
from donning.utils.commands import Arg, CommandBlueprint, Invocation

diff_bp = CommandBlueprint("diff")


@diff_bp.command(
    "diff",
    help="show the changes between two host directories",
    args=[Arg.of("dir_a", metavar="DIR_A"), Arg.of("dir_b", metavar="DIR_B")],
)
def diff(inv: Invocation) -> int:
    before = HostFsService.read_directory(inv.args.dir_a)
    after = HostFsService.read_directory(inv.args.dir_b)
    layer = LayerFsService.diff(before, after)
    for path, change in layer.sorted_items():
        if change.is_delete:
            print(f"delete {path}")
        else:
            print(f"put    {path} ({change.node.size} bytes)")
    print(
        f"{len(layer.puts())} put, {len(layer.deletes())} delete, "
        f"{LayerFsService.payload_size(layer)} bytes"
    )
    return 0
