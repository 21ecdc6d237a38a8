"""Inter-agent messaging: a single-hop router gated by line of sight.

A message sent on tick t is evaluated against the world as it stands at t
(sender and recipient positions, occupancy between them) and, if it gets
through, lands in the recipient's inbox one tick later. There is no relaying
and no queueing inside the channel itself: blocked means dropped, and it is
the sender's job to retry. The ground station is an ordinary, stationary
participant named "gcs".
"""

from __future__ import annotations

import base64
import json
import zlib
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from .geometry import voxel_raycast
from .world import OccupancyGrid

MAX_MESSAGE_BYTES = 65536
GCS_NAME = "gcs"
BROADCAST = "*"

# message kinds used by the engine's automatic feeds; planners may add more
KIND_ODOMETRY = "odometry"
KIND_MAP_CHUNK = "map-chunk"
KIND_CAPTURE_REPORT = "capture-report"
KIND_PLANNER_DATA = "planner-data"


@dataclass(frozen=True)
class Message:
    sender: str
    recipient: str  # agent name, or BROADCAST for everyone in sight
    kind: str
    payload: dict
    tick: int = 0  # send tick; stamped by the engine

    def addressed_to(self, name: str) -> "Message":
        return replace(self, recipient=name)


def message_size_bytes(msg: Message) -> int:
    """Wire size: canonical JSON payload plus addressing overhead."""
    body = json.dumps(msg.payload, sort_keys=True, separators=(",", ":"))
    return len(body.encode()) + len(msg.sender) + len(msg.recipient) + len(msg.kind) + 16


def line_of_sight(grid: OccupancyGrid, a: Sequence[float], b: Sequence[float]) -> bool:
    """True when no occupied voxel (other than the endpoints' own) intervenes."""
    blocked, _ = voxel_raycast(grid.origin, grid.voxel_size, grid.dims, grid.occ, a, b)
    return not blocked


def route(
    messages: Iterable[Message],
    positions: Mapping[str, Sequence[float]],
    grid: OccupancyGrid,
) -> tuple[dict[str, list[Message]], list[tuple[Message, str]]]:
    """Deliver one tick's traffic.

    Returns (inboxes keyed by recipient, dropped (message, reason) pairs).
    Broadcasts fan out to every other agent currently in sight and are never
    reported as drops; directed messages drop with a reason when oversized,
    misaddressed, or blocked.
    """
    inboxes: dict[str, list[Message]] = {name: [] for name in positions}
    dropped: list[tuple[Message, str]] = []
    for msg in messages:
        if message_size_bytes(msg) > MAX_MESSAGE_BYTES:
            dropped.append((msg, "oversize"))
            continue
        src = positions.get(msg.sender)
        if src is None:
            dropped.append((msg, "unknown-sender"))
            continue
        if msg.recipient == BROADCAST:
            for name in sorted(positions):
                if name == msg.sender:
                    continue
                if line_of_sight(grid, src, positions[name]):
                    inboxes[name].append(msg.addressed_to(name))
            continue
        dst = positions.get(msg.recipient)
        if dst is None:
            dropped.append((msg, "unknown-recipient"))
            continue
        if not line_of_sight(grid, src, dst):
            dropped.append((msg, "no-line-of-sight"))
            continue
        inboxes[msg.recipient].append(msg)
    return inboxes, dropped


# ------------------------------------------------------------------
# map payload packing
# ------------------------------------------------------------------

def pack_cells(raw: bytes) -> str:
    """Compress a run of voxel states for a JSON payload."""
    return base64.b64encode(zlib.compress(bytes(raw), level=6)).decode("ascii")


def unpack_cells(packed: str) -> bytes:
    return zlib.decompress(base64.b64decode(packed.encode("ascii")))
