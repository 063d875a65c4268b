"""Shared machinery for inserting and removing pickup/delivery leg pairs.

A "leg" is an ordered (load-increasing stop, load-decreasing stop) pair: a
direct request contributes one leg (pickup, delivery); a relayed request
contributes two, (pickup, transfer drop) and (transfer pick, delivery).
Insertion slots are pairs (i, j) with 1 <= i <= j <= len(stops) - 1: the first
stop is inserted before stop index i, the second before stop index j, i == j
placing them adjacently. Feasibility here means the load profile stays within
capacity; time synchronization is always satisfiable by waiting unless routes
deadlock, which callers verify with the full checker when they touch transfer
legs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import (
    Action,
    Direct,
    Instance,
    Request,
    Route,
    Solution,
    Stop,
    Transferred,
    route_loads,
)


@dataclass
class RouteState:
    """Cached per-route arrays for slot evaluation."""

    nodes: np.ndarray  # int node id per stop
    after: np.ndarray  # load after each stop

    @classmethod
    def of(cls, instance: Instance, route: Route) -> "RouteState":
        nodes = np.fromiter((s.node for s in route.stops), dtype=np.int64, count=len(route.stops))
        after = np.asarray(route_loads(instance, route), dtype=np.int64)
        return cls(nodes, after)

    @property
    def gaps(self) -> int:
        return len(self.nodes) - 1


def direct_leg(request: Request):
    return (
        Stop(request.pickup, Action.PICKUP, request.id),
        Stop(request.delivery, Action.DELIVERY, request.id),
    )


def transfer_legs(request: Request, transfer: int):
    first = (
        Stop(request.pickup, Action.PICKUP, request.id),
        Stop(transfer, Action.TRANSFER_DROP, request.id, transfer),
    )
    second = (
        Stop(transfer, Action.TRANSFER_PICK, request.id, transfer),
        Stop(request.delivery, Action.DELIVERY, request.id),
    )
    return first, second


def slot_tables(instance: Instance, state: RouteState, capacity: int, first: Stop, second: Stop,
                quantity: int, min_first: int = 1, max_second: Optional[int] = None):
    """Delta and feasibility matrices over all slots, indexed [i-1, j-1]."""
    m = state.gaps
    d = instance.metric
    a, b = state.nodes[:-1], state.nodes[1:]
    arc = d[a, b]
    g_first = d[a, first.node] + d[first.node, b] - arc
    g_second = d[a, second.node] + d[second.node, b] - arc
    adjacent = d[a, first.node] + d[first.node, second.node] + d[second.node, b] - arc

    delta = g_first[:, None] + g_second[None, :]
    np.fill_diagonal(delta, adjacent)

    # max load carried while the new quantity is on board: window max of
    # after[i-1 .. j-1]
    peak = np.full((m, m), np.iinfo(np.int64).max, dtype=np.int64)
    loads = state.after[:m]
    for gi in range(m):
        peak[gi, gi:] = np.maximum.accumulate(loads[gi:])
    feas = peak + quantity <= capacity
    feas &= np.tri(m, m, k=0, dtype=bool).T  # upper triangle: i <= j
    if min_first > 1:
        feas[: min_first - 1, :] = False
    if max_second is not None:
        feas[:, max_second:] = False
    return delta, feas


def best_slot(instance, state, capacity, first, second, quantity, min_first=1, max_second=None):
    """Cheapest feasible slot, ties broken by smallest (i, j); None if no slot fits."""
    delta, feas = slot_tables(instance, state, capacity, first, second, quantity, min_first, max_second)
    if not feas.any():
        return None
    masked = np.where(feas, delta, np.inf)
    flat = int(masked.argmin())
    gi, gj = divmod(flat, delta.shape[1])
    return gi + 1, gj + 1, float(masked[gi, gj])


def iter_slots(instance, state, capacity, first, second, quantity, min_first=1, max_second=None):
    """All feasible (i, j, delta) in (i, j) order."""
    delta, feas = slot_tables(instance, state, capacity, first, second, quantity, min_first, max_second)
    for gi, gj in np.argwhere(feas):
        yield int(gi) + 1, int(gj) + 1, float(delta[gi, gj])


def slot_feasible(state: RouteState, capacity: int, quantity: int, i: int, j: int,
                  min_first: int = 1, max_second: Optional[int] = None) -> bool:
    m = state.gaps
    if not (min_first <= i <= j <= m):
        return False
    if max_second is not None and j > max_second:
        return False
    window = state.after[i - 1 : j]
    return int(window.max()) + quantity <= capacity


def slot_delta(instance: Instance, state: RouteState, first: Stop, second: Stop, i: int, j: int) -> float:
    d = instance.metric
    nodes = state.nodes
    if i == j:
        return float(
            d[nodes[i - 1], first.node] + d[first.node, second.node] + d[second.node, nodes[i]] - d[nodes[i - 1], nodes[i]]
        )
    return float(
        d[nodes[i - 1], first.node] + d[first.node, nodes[i]] - d[nodes[i - 1], nodes[i]]
        + d[nodes[j - 1], second.node] + d[second.node, nodes[j]] - d[nodes[j - 1], nodes[j]]
    )


def removal_delta(instance: Instance, route: Route, p1: int, p2: int) -> float:
    """Cost saved by deleting the stops at positions p1 < p2."""
    d = instance.metric
    s = route.stops
    n = lambda k: s[k].node
    if p2 == p1 + 1:
        return float(d[n(p1 - 1), n(p1)] + d[n(p1), n(p2)] + d[n(p2), n(p2 + 1)] - d[n(p1 - 1), n(p2 + 1)])
    return float(
        d[n(p1 - 1), n(p1)] + d[n(p1), n(p1 + 1)] - d[n(p1 - 1), n(p1 + 1)]
        + d[n(p2 - 1), n(p2)] + d[n(p2), n(p2 + 1)] - d[n(p2 - 1), n(p2 + 1)]
    )


def insert_pair(route: Route, i: int, j: int, first: Stop, second: Stop) -> None:
    """Insert in place at slot (i, j); callers work on copies."""
    route.stops = route.stops[:i] + [first] + route.stops[i:j] + [second] + route.stops[j:]


def remove_request(solution: Solution, request_id: int) -> Solution:
    """Copy of the solution without any stop or assignment of the request."""
    out = solution.copy()
    for route in out.routes:
        route.stops = [s for s in route.stops if s.request != request_id]
    out.assignment.pop(request_id, None)
    return out


def route_index(solution: Solution, vehicle_id: int) -> int:
    for idx, route in enumerate(solution.routes):
        if route.vehicle == vehicle_id:
            return idx
    raise KeyError(vehicle_id)


def apply_direct(solution: Solution, instance: Instance, request: Request, vehicle_id: int, i: int, j: int) -> Solution:
    out = solution.copy()
    first, second = direct_leg(request)
    insert_pair(out.routes[route_index(out, vehicle_id)], i, j, first, second)
    out.assignment[request.id] = Direct(vehicle_id)
    return out
