"""Multi-agent open-path routing for waypoint tours.

Each agent starts from its own position and must visit its share of the
waypoints once, no return leg. The solver is cheapest-insertion seeding
followed by per-route 2-opt and inter-route relocate/swap improvement, with
either a min-makespan (default) or min-total objective. A brute-force exact
solver over small instances backs the quality tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .geometry import Aabb, Vec3, vdist

DistanceFn = Callable[[Sequence[float], Sequence[float]], float]

_IMPROVE_EPS = 1e-9


@dataclass(frozen=True)
class Waypoint:
    """A place to be, with the facing to adopt there. `data` rides along for
    the planner's own bookkeeping and never affects routing cost."""

    position: Vec3
    yaw: float = 0.0
    pitch: float = 0.0
    data: object = None


@dataclass
class RoutePlan:
    routes: list[list[int]]  # waypoint indices, one list per agent
    costs: list[float]

    def makespan(self) -> float:
        return max(self.costs) if self.costs else 0.0

    def total(self) -> float:
        return sum(self.costs)


def _objective(costs: Sequence[float], objective: str) -> float:
    if objective == "makespan":
        return max(costs) if costs else 0.0
    if objective == "total":
        return sum(costs)
    raise ValueError(f"unknown objective {objective!r}")


def _build_matrix(
    starts: Sequence[Sequence[float]],
    waypoints: Sequence[Waypoint],
    distance: Optional[DistanceFn],
) -> list[list[float]]:
    dist = distance or vdist
    pts = [tuple(s) for s in starts] + [tuple(w.position) for w in waypoints]
    n = len(pts)
    m = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            d = float(dist(pts[i], pts[j]))
            m[i][j] = d
            m[j][i] = d
    return m


def path_cost(route: Sequence[int], agent: int, m: Sequence[Sequence[float]], n_starts: int) -> float:
    """Cost of an open path: agent start, then each waypoint in order."""
    if not route:
        return 0.0
    prev = agent
    total = 0.0
    for w in route:
        node = n_starts + w
        total += m[prev][node]
        prev = node
    return total


def _two_opt(route: list[int], agent: int, m, n_starts: int, max_passes: int = 40) -> list[int]:
    """First-improvement 2-opt on an open path (tail reversals included)."""
    if len(route) < 3:
        return route
    for _ in range(max_passes):
        improved = False
        n = len(route)
        for i in range(n - 1):
            prev = agent if i == 0 else n_starts + route[i - 1]
            for j in range(i + 1, n):
                a = n_starts + route[i]
                b = n_starts + route[j]
                if j == n - 1:
                    delta = m[prev][b] - m[prev][a]
                else:
                    nxt = n_starts + route[j + 1]
                    delta = m[prev][b] + m[a][nxt] - m[prev][a] - m[b][nxt]
                if delta < -_IMPROVE_EPS:
                    route[i : j + 1] = reversed(route[i : j + 1])
                    improved = True
                    break
            if improved:
                break
        if not improved:
            break
    return route


def _insertion_delta(route: Sequence[int], agent: int, m, n_starts: int, w: int, slot: int) -> float:
    node = n_starts + w
    prev = agent if slot == 0 else n_starts + route[slot - 1]
    if slot == len(route):
        return m[prev][node]
    nxt = n_starts + route[slot]
    return m[prev][node] + m[node][nxt] - m[prev][nxt]


def solve_mtsp(
    starts: Sequence[Sequence[float]],
    waypoints: Sequence[Waypoint],
    distance: Optional[DistanceFn] = None,
    objective: str = "makespan",
    improve_rounds: int = 60,
) -> RoutePlan:
    """Route all waypoints across the agents; deterministic for fixed input."""
    k = len(starts)
    if k == 0:
        raise ValueError("solve_mtsp needs at least one agent")
    n = len(waypoints)
    routes: list[list[int]] = [[] for _ in range(k)]
    if n == 0:
        return RoutePlan(routes=routes, costs=[0.0] * k)
    m = _build_matrix(starts, waypoints, distance)
    costs = [0.0] * k

    # --- cheapest insertion, objective aware -------------------------------
    unrouted = list(range(n))
    while unrouted:
        best = None  # (objective value, delta, agent, slot, list pos)
        for pos, w in enumerate(unrouted):
            for a in range(k):
                route = routes[a]
                for slot in range(len(route) + 1):
                    delta = _insertion_delta(route, a, m, k, w, slot)
                    if objective == "makespan":
                        value = max(costs[a] + delta, *(costs[b] for b in range(k) if b != a)) if k > 1 else costs[a] + delta
                    else:
                        value = delta
                    key = (value, delta, a, slot, pos)
                    if best is None or key < best:
                        best = key
        _, delta, a, slot, pos = best
        routes[a].insert(slot, unrouted.pop(pos))
        costs[a] += delta

    # --- improvement: 2-opt within routes, relocate/swap across ------------
    for a in range(k):
        routes[a] = _two_opt(routes[a], a, m, k)
        costs[a] = path_cost(routes[a], a, m, k)

    for _ in range(improve_rounds):
        changed = False
        base = _objective(costs, objective)

        # relocate one waypoint to any other slot (any agent)
        done = False
        for a in range(k):
            if done:
                break
            for i in range(len(routes[a])):
                w = routes[a][i]
                trial_a = routes[a][:i] + routes[a][i + 1 :]
                cost_a = path_cost(trial_a, a, m, k)
                for b in range(k):
                    source_cost = cost_a if b == a else costs[b]
                    target = trial_a if b == a else routes[b]
                    for slot in range(len(target) + 1):
                        delta = _insertion_delta(target, b, m, k, w, slot)
                        new_costs = list(costs)
                        new_costs[a] = cost_a
                        new_costs[b] = source_cost + delta
                        if _objective(new_costs, objective) < base - _IMPROVE_EPS:
                            routes[a] = trial_a
                            if b == a:
                                routes[a] = trial_a[:slot] + [w] + trial_a[slot:]
                            else:
                                routes[b] = routes[b][:slot] + [w] + routes[b][slot:]
                            costs[a] = path_cost(routes[a], a, m, k)
                            costs[b] = path_cost(routes[b], b, m, k)
                            changed = True
                            done = True
                            break
                    if done:
                        break
                if done:
                    break

        # swap a pair of waypoints between two different agents
        if not changed:
            base = _objective(costs, objective)
            done = False
            for a in range(k):
                if done:
                    break
                for b in range(a + 1, k):
                    if done:
                        break
                    for i in range(len(routes[a])):
                        if done:
                            break
                        for j in range(len(routes[b])):
                            ra = list(routes[a])
                            rb = list(routes[b])
                            ra[i], rb[j] = rb[j], ra[i]
                            ca = path_cost(ra, a, m, k)
                            cb = path_cost(rb, b, m, k)
                            new_costs = list(costs)
                            new_costs[a], new_costs[b] = ca, cb
                            if _objective(new_costs, objective) < base - _IMPROVE_EPS:
                                routes[a], routes[b] = ra, rb
                                costs[a], costs[b] = ca, cb
                                changed = True
                                done = True

        if changed:
            for a in range(k):
                routes[a] = _two_opt(routes[a], a, m, k)
                costs[a] = path_cost(routes[a], a, m, k)
        else:
            break

    return RoutePlan(routes=routes, costs=costs)


# ------------------------------------------------------------------
# exact solver for small instances
# ------------------------------------------------------------------

def exact_mtsp_small(
    starts: Sequence[Sequence[float]],
    waypoints: Sequence[Waypoint],
    distance: Optional[DistanceFn] = None,
    objective: str = "makespan",
    max_waypoints: int = 12,
) -> RoutePlan:
    """Optimal routing by dynamic programming over subsets plus partition
    enumeration. Exponential: refuses instances beyond `max_waypoints`.
    """
    k = len(starts)
    n = len(waypoints)
    if n > max_waypoints:
        raise ValueError(f"exact solver limited to {max_waypoints} waypoints, got {n}")
    if k == 0:
        raise ValueError("exact_mtsp_small needs at least one agent")
    routes: list[list[int]] = [[] for _ in range(k)]
    if n == 0:
        return RoutePlan(routes=routes, costs=[0.0] * k)
    m = _build_matrix(starts, waypoints, distance)
    full = (1 << n) - 1
    inf = math.inf

    # per-agent open-path DP: dp[mask][last] = best cost visiting mask, ending at last
    best_cost = []
    best_route = []
    for a in range(k):
        dp = [[inf] * n for _ in range(full + 1)]
        par = [[-1] * n for _ in range(full + 1)]
        for i in range(n):
            dp[1 << i][i] = m[a][k + i]
        for mask in range(1, full + 1):
            row = dp[mask]
            for last in range(n):
                c = row[last]
                if c == inf or not (mask >> last) & 1:
                    continue
                for j in range(n):
                    if (mask >> j) & 1:
                        continue
                    nm = mask | (1 << j)
                    nc = c + m[k + last][k + j]
                    if nc < dp[nm][j]:
                        dp[nm][j] = nc
                        par[nm][j] = last
        bc = [0.0] * (full + 1)
        br: list[Optional[tuple[int, int]]] = [None] * (full + 1)  # (last, cost idx) for rebuild
        for mask in range(1, full + 1):
            best, arg = inf, -1
            for last in range(n):
                if dp[mask][last] < best:
                    best, arg = dp[mask][last], last
            bc[mask] = best
            br[mask] = arg
        best_cost.append(bc)
        best_route.append((dp, par, br))

    # enumerate labeled partitions of the waypoint set across agents
    best_key = None
    best_masks = None

    def recurse(agent: int, remaining: int, masks: list[int], costs: list[float]) -> None:
        nonlocal best_key, best_masks
        if agent == k - 1:
            masks.append(remaining)
            costs.append(best_cost[agent][remaining] if remaining else 0.0)
            if all(c < inf for c in costs):
                key = (_objective(costs, objective), sum(costs), tuple(masks))
                if best_key is None or key < best_key:
                    best_key = key
                    best_masks = list(masks)
            masks.pop()
            costs.pop()
            return
        sub = remaining
        while True:
            masks.append(sub)
            costs.append(best_cost[agent][sub] if sub else 0.0)
            recurse(agent + 1, remaining ^ sub, masks, costs)
            masks.pop()
            costs.pop()
            if sub == 0:
                break
            sub = (sub - 1) & remaining

    recurse(0, full, [], [])
    assert best_masks is not None

    out_costs = []
    for a in range(k):
        mask = best_masks[a]
        if mask == 0:
            out_costs.append(0.0)
            continue
        dp, par, br = best_route[a]
        last = br[mask]
        order = []
        cur = mask
        while last != -1 and cur:
            order.append(last)
            nxt = par[cur][last]
            cur ^= 1 << last
            last = nxt
        order.reverse()
        routes[a] = order
        out_costs.append(path_cost(order, a, m, k))
    return RoutePlan(routes=routes, costs=out_costs)


# ------------------------------------------------------------------
# box partitioning helpers
# ------------------------------------------------------------------

def box_assignment_cost(
    start: Sequence[float], box: Aabb, w_dist: float = 1.0, w_volume: float = 0.05
) -> float:
    """Greedy box-to-team cost: travel to reach it plus a volume workload term."""
    from .geometry import point_box_distance

    return w_dist * point_box_distance(Vec3(*start), box) + w_volume * box.volume()


def split_box_longest_side(box: Aabb, weights: Sequence[float]) -> list[Aabb]:
    """Slab-split a box along its longest axis, widths proportional to weights."""
    if not weights:
        raise ValueError("split needs at least one weight")
    if any(w <= 0 for w in weights):
        raise ValueError("split weights must be positive")
    size = box.size()
    axis = max(range(3), key=lambda ax: (size[ax], -ax))
    total = float(sum(weights))
    out = []
    edge = box.lo[axis]
    acc = 0.0
    for idx, w in enumerate(weights):
        acc += w
        nxt = box.lo[axis] + size[axis] * (acc / total) if idx < len(weights) - 1 else box.hi[axis]
        lo2 = list(box.lo)
        hi2 = list(box.hi)
        lo2[axis] = edge
        hi2[axis] = nxt
        out.append(Aabb(Vec3(*lo2), Vec3(*hi2)))
        edge = nxt
    return out
