"""Message router tests: line-of-sight gating, broadcast fan-out, size limits,
and soundness properties (no through-wall delivery, symmetric reachability)
on randomized worlds.
"""

import random

import pytest

from oracles import dense_los_blocked

from caric_kernel.comms import (
    BROADCAST,
    GCS_NAME,
    MAX_MESSAGE_BYTES,
    Message,
    line_of_sight,
    message_size_bytes,
    pack_cells,
    route,
    unpack_cells,
)
from caric_kernel.geometry import Vec3
from caric_kernel.world import FREE, OCCUPIED, OccupancyGrid


def open_grid(n=10):
    return OccupancyGrid(Vec3(0, 0, 0), 1.0, (n, n, n), fill=FREE)


def walled_grid(n=10, x_slab=5):
    g = open_grid(n)
    g.as_array()[x_slab, :, :] = OCCUPIED
    g.rebuild_occ()
    return g


def msg(sender, recipient, payload=None, kind="planner-data"):
    return Message(sender=sender, recipient=recipient, kind=kind, payload=payload or {})


def test_clear_path_delivers():
    g = open_grid()
    inboxes, dropped = route(
        [msg("alpha", "bravo", {"x": 1})],
        {"alpha": Vec3(1.5, 5, 5), "bravo": Vec3(8.5, 5, 5)},
        g,
    )
    assert [m.payload for m in inboxes["bravo"]] == [{"x": 1}]
    assert dropped == []


def test_wall_blocks_delivery():
    g = walled_grid()
    inboxes, dropped = route(
        [msg("alpha", "bravo")],
        {"alpha": Vec3(1.5, 5, 5), "bravo": Vec3(8.5, 5, 5)},
        g,
    )
    assert inboxes["bravo"] == []
    assert len(dropped) == 1 and dropped[0][1] == "no-line-of-sight"


def test_gcs_is_a_normal_recipient():
    g = walled_grid()
    positions = {"alpha": Vec3(1.5, 5, 5), GCS_NAME: Vec3(1.5, 1.5, 0.5)}
    inboxes, dropped = route([msg("alpha", GCS_NAME, {"r": 1}, kind="capture-report")], positions, g)
    assert len(inboxes[GCS_NAME]) == 1
    assert dropped == []


def test_broadcast_fans_out_only_in_sight():
    g = walled_grid()
    positions = {
        "alpha": Vec3(1.5, 5, 5),
        "bravo": Vec3(3.5, 5, 5),  # same side: visible
        "charlie": Vec3(8.5, 5, 5),  # behind the wall
        GCS_NAME: Vec3(1.5, 1.5, 0.5),  # same side
    }
    inboxes, dropped = route([msg("alpha", BROADCAST, {"hello": 1})], positions, g)
    assert len(inboxes["bravo"]) == 1
    assert inboxes["bravo"][0].recipient == "bravo"
    assert inboxes["charlie"] == []
    assert len(inboxes[GCS_NAME]) == 1
    assert inboxes["alpha"] == []  # no self-delivery
    assert dropped == []  # broadcasts don't report per-target misses


def test_oversize_message_dropped():
    g = open_grid()
    big = msg("alpha", "bravo", {"blob": "x" * (MAX_MESSAGE_BYTES + 1)})
    assert message_size_bytes(big) > MAX_MESSAGE_BYTES
    inboxes, dropped = route([big], {"alpha": Vec3(1, 1, 1), "bravo": Vec3(2, 2, 2)}, g)
    assert inboxes["bravo"] == []
    assert dropped[0][1] == "oversize"


def test_unknown_recipient_dropped():
    g = open_grid()
    inboxes, dropped = route([msg("alpha", "nobody")], {"alpha": Vec3(1, 1, 1)}, g)
    assert dropped[0][1] == "unknown-recipient"
    inboxes, dropped = route([msg("ghost", "alpha")], {"alpha": Vec3(1, 1, 1)}, g)
    assert dropped[0][1] == "unknown-sender"


def test_delivery_order_is_stable():
    g = open_grid()
    positions = {"alpha": Vec3(1, 1, 1), "bravo": Vec3(2, 2, 2), "charlie": Vec3(3, 3, 3)}
    traffic = [
        msg("alpha", "charlie", {"n": 1}),
        msg("bravo", "charlie", {"n": 2}),
        msg("alpha", BROADCAST, {"n": 3}),
    ]
    first, _ = route(traffic, positions, g)
    second, _ = route(traffic, positions, g)
    assert [m.payload for m in first["charlie"]] == [{"n": 1}, {"n": 2}, {"n": 3}]
    assert first == second


def test_same_voxel_agents_always_connect():
    g = walled_grid()
    positions = {"alpha": Vec3(5.2, 5.2, 5.2), "bravo": Vec3(5.8, 5.8, 5.8)}  # both inside the wall slab
    inboxes, dropped = route([msg("alpha", "bravo")], positions, g)
    assert len(inboxes["bravo"]) == 1


def test_router_soundness_on_random_worlds():
    """Randomized property: delivered implies the dense-sampling oracle also
    sees a clear line, and reachability is symmetric."""
    rng = random.Random(404)
    for world in range(60):
        n = 12
        g = open_grid(n)
        arr = g.as_array()
        occupied = set()
        for _ in range(rng.randrange(40, 200)):
            c = (rng.randrange(n), rng.randrange(n), rng.randrange(n))
            occupied.add(c)
            arr[c] = OCCUPIED
        g.rebuild_occ()

        positions = {}
        names = ["alpha", "bravo", "charlie", GCS_NAME]
        while len(positions) < len(names):
            p = Vec3(rng.uniform(0.05, n - 0.05), rng.uniform(0.05, n - 0.05), rng.uniform(0.05, n - 0.05))
            if g.state(g.world_to_voxel(p)) != OCCUPIED:
                positions[names[len(positions)]] = p

        for a in names:
            for b in names:
                if a == b:
                    continue
                los = line_of_sight(g, positions[a], positions[b])
                # symmetry
                assert los == line_of_sight(g, positions[b], positions[a])
                inboxes, _ = route([msg(a, b)], positions, g)
                delivered = len(inboxes[b]) == 1
                assert delivered == los
                if delivered:
                    assert not dense_los_blocked(
                        g.origin, g.voxel_size, g.dims, occupied, positions[a], positions[b]
                    ), f"world {world}: through-wall delivery {a}->{b}"


def test_pack_cells_round_trip():
    raw = bytes([0, 1, 2, 1, 0] * 500)
    packed = pack_cells(raw)
    assert isinstance(packed, str)
    assert unpack_cells(packed) == raw
    # compresses well enough for whole desk-scale maps to fit a message
    assert len(packed) < MAX_MESSAGE_BYTES // 4
