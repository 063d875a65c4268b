"""Core data model and evaluation kernel for pickup-and-delivery routing with transfers.

An :class:`Instance` holds nodes, requests, vehicles, the transfer-point set and a
precomputed Euclidean metric. A :class:`Solution` is one ordered route per vehicle
plus an assignment mapping each request either to a single vehicle or to a
(first vehicle, transfer node, second vehicle) relay. :func:`propagate_schedule`
derives earliest departure times and vehicle loads, lifting the collecting
vehicle's clock at a transfer until the dropping vehicle has arrived.
:func:`check_feasibility` reports every violated constraint instead of raising,
and :func:`solution_cost` sums the traversed arc lengths; the checker, not the
cost, decides feasibility.

Instances are immutable after construction and safe to share across workers;
solutions are value-like and copied, never shared mutably.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np

from .errors import CyclicTransferError, InputError

TOL = 1e-9
COST_TOL = 1e-6  # absolute tolerance wherever costs are compared for ties


class NodeKind(Enum):
    PICKUP = "pickup"
    DELIVERY = "delivery"
    VEHICLE_START = "vehicle_start"
    VEHICLE_END = "vehicle_end"
    TRANSFER = "transfer"


class Action(Enum):
    PICKUP = "pickup"
    DELIVERY = "delivery"
    TRANSFER_DROP = "transfer_drop"
    TRANSFER_PICK = "transfer_pick"
    DEPART_DEPOT = "depart_depot"
    ARRIVE_DEPOT = "arrive_depot"


#: Load change applied when the action at a stop is performed.
LOAD_SIGN = {
    Action.PICKUP: 1,
    Action.TRANSFER_PICK: 1,
    Action.DELIVERY: -1,
    Action.TRANSFER_DROP: -1,
    Action.DEPART_DEPOT: 0,
    Action.ARRIVE_DEPOT: 0,
}

REQUEST_ACTIONS = (Action.PICKUP, Action.DELIVERY, Action.TRANSFER_DROP, Action.TRANSFER_PICK)
DEPOT_ACTIONS = (Action.DEPART_DEPOT, Action.ARRIVE_DEPOT)


class Constraint(Enum):
    """Tags for the checked constraint families."""

    ASSIGN = "ASSIGN(2)"
    VISIT = "VISIT(3)"
    DEPOT_START = "DEPOT_START(4)"
    DEPOT_END = "DEPOT_END(5)"
    CLOCK_ZERO = "CLOCK_ZERO(6)"
    PRECEDENCE = "PRECEDENCE(7)"
    TIME_PROP = "TIME_PROP(8)"
    LOAD_ZERO = "LOAD_ZERO(9)"
    CAPACITY = "CAPACITY(10)"
    NONNEG_TIME = "NONNEG_TIME(11)"
    NONNEG_LOAD = "NONNEG_LOAD(12)"
    TRANSFER_SYNC = "TRANSFER_SYNC"


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    kind: NodeKind


@dataclass(frozen=True)
class Request:
    id: int
    pickup: int
    delivery: int
    quantity: int


@dataclass(frozen=True)
class Vehicle:
    id: int
    capacity: int
    start_depot: int
    end_depot: int


class Instance:
    """Immutable problem instance with a precomputed node-to-node L2 metric."""

    def __init__(self, nodes, requests, vehicles, transfer_points=(), name="instance"):
        self.name = name
        self.nodes = list(nodes)
        self.requests = sorted(requests, key=lambda r: r.id)
        self.vehicles = sorted(vehicles, key=lambda v: v.id)
        self.transfer_points = sorted(set(transfer_points))
        self._validate()
        xy = np.array([[n.x, n.y] for n in self.nodes], dtype=float)
        diff = xy[:, None, :] - xy[None, :, :]
        self.metric = np.sqrt((diff * diff).sum(axis=2))
        self._transfer_set = frozenset(self.transfer_points)

    def _validate(self):
        n = len(self.nodes)
        if [node.id for node in self.nodes] != list(range(n)):
            raise InputError("node ids must be dense 0..n-1 in order")
        for node in self.nodes:
            if not (math.isfinite(node.x) and math.isfinite(node.y)):
                raise InputError(f"node {node.id} has non-finite coordinates")
        if [r.id for r in self.requests] != list(range(len(self.requests))):
            raise InputError("request ids must be dense 0..r-1")
        for r in self.requests:
            if r.pickup == r.delivery:
                raise InputError(f"request {r.id}: pickup equals delivery")
            if not (0 <= r.pickup < n and 0 <= r.delivery < n):
                raise InputError(f"request {r.id}: node id out of range")
            if r.quantity < 1:
                raise InputError(f"request {r.id}: quantity must be >= 1")
        if [v.id for v in self.vehicles] != list(range(len(self.vehicles))):
            raise InputError("vehicle ids must be dense 0..v-1")
        for v in self.vehicles:
            if not (0 <= v.start_depot < n and 0 <= v.end_depot < n):
                raise InputError(f"vehicle {v.id}: depot id out of range")
            if v.capacity < 1:
                raise InputError(f"vehicle {v.id}: capacity must be >= 1")
        for t in self.transfer_points:
            if not (0 <= t < n):
                raise InputError(f"transfer point {t} out of range")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def distance(self, i: int, j: int) -> float:
        n = len(self.nodes)
        if not (0 <= i < n and 0 <= j < n):
            raise InputError(f"node id out of range: ({i}, {j})")
        return float(self.metric[i, j])

    def is_transfer(self, node_id: int) -> bool:
        return node_id in self._transfer_set


def distance(instance: Instance, i: int, j: int) -> float:
    """Euclidean travel distance between two nodes of the instance."""
    return instance.distance(i, j)


@dataclass(frozen=True)
class Stop:
    node: int
    action: Action
    request: Optional[int] = None
    transfer: Optional[int] = None


@dataclass
class Route:
    vehicle: int
    stops: list  # list[Stop], first depart_depot, last arrive_depot

    def copy(self) -> "Route":
        return Route(self.vehicle, list(self.stops))


@dataclass(frozen=True)
class Direct:
    vehicle: int


@dataclass(frozen=True)
class Transferred:
    first_vehicle: int
    transfer: int
    second_vehicle: int


Assignment = Union[Direct, Transferred]


@dataclass
class Solution:
    """One route per vehicle (aligned with ``instance.vehicles``) plus the request assignment."""

    routes: list  # list[Route]
    assignment: dict  # request id -> Direct | Transferred

    def copy(self) -> "Solution":
        return Solution([r.copy() for r in self.routes], dict(self.assignment))

    def route_of(self, vehicle_id: int) -> Route:
        for r in self.routes:
            if r.vehicle == vehicle_id:
                return r
        raise InputError(f"no route for vehicle {vehicle_id}")

    def sort_key(self):
        """Deterministic total order on solutions, used for tie-breaking."""
        return (
            tuple(
                (r.vehicle, tuple((s.node, s.action.value, s.request, s.transfer) for s in r.stops))
                for r in self.routes
            ),
            tuple(sorted((k, repr(v)) for k, v in self.assignment.items())),
        )


def empty_solution(instance: Instance) -> Solution:
    routes = [
        Route(v.id, [Stop(v.start_depot, Action.DEPART_DEPOT), Stop(v.end_depot, Action.ARRIVE_DEPOT)])
        for v in instance.vehicles
    ]
    return Solution(routes, {})


@dataclass
class Schedule:
    """Departure time and post-action vehicle load per (route index, stop index)."""

    departure: list  # list[list[float]]
    load: list  # list[list[int]]


def route_loads(instance: Instance, route: Route) -> list:
    qty = {r.id: r.quantity for r in instance.requests}
    loads = []
    cur = 0
    for stop in route.stops:
        cur += LOAD_SIGN[stop.action] * qty.get(stop.request, 0)
        loads.append(cur)
    return loads


def _transfer_positions(solution: Solution):
    """First (route idx, stop idx) of each request's transfer drop and pick."""
    drops, picks = {}, {}
    for ri, route in enumerate(solution.routes):
        for si, stop in enumerate(route.stops):
            if stop.action is Action.TRANSFER_DROP:
                drops.setdefault(stop.request, (ri, si))
            elif stop.action is Action.TRANSFER_PICK:
                picks.setdefault(stop.request, (ri, si))
    return drops, picks


def propagate_schedule(instance: Instance, solution: Solution) -> Schedule:
    """Earliest departure times and loads for every stop.

    Times start at 0 at each start depot and advance by the travel time of each
    arc. A transfer pick in another route is postponed until the corresponding
    drop has happened; the coupled system is solved by iterating the cross-route
    constraints to a fixed point. Raises :class:`CyclicTransferError` if routes
    wait on each other with strictly growing clocks.
    """
    routes = solution.routes
    loads = [route_loads(instance, r) for r in routes]
    drops, picks = _transfer_positions(solution)
    # Cross-route waits; same-route pairs follow from chain order (or are sync
    # violations, which the checker reports from stop indices).
    cross = [
        (req, drops[req], picks[req])
        for req in sorted(drops)
        if req in picks and drops[req][0] != picks[req][0]
    ]
    lifts = {}  # (route idx, stop idx) -> earliest allowed departure

    def chains():
        deps = []
        for ri, route in enumerate(routes):
            times = []
            cur = 0.0
            prev_node = None
            for si, stop in enumerate(route.stops):
                if si > 0:
                    cur += instance.distance(prev_node, stop.node)
                cur = max(cur, lifts.get((ri, si), 0.0))
                times.append(cur)
                prev_node = stop.node
            deps.append(times)
        return deps

    departures = chains()
    for _ in range(len(cross) + 2):
        changed = False
        for _req, (dri, dsi), (pri, psi) in cross:
            want = departures[dri][dsi]
            if want > lifts.get((pri, psi), 0.0) + 1e-12:
                lifts[(pri, psi)] = want
                changed = True
        if not changed:
            break
        departures = chains()
    else:
        raise CyclicTransferError("routes wait on each other's transfers in a cycle")
    return Schedule(departures, loads)


@dataclass(frozen=True)
class Violation:
    constraint: Constraint
    detail: str


@dataclass
class FeasibilityReport:
    feasible: bool
    violations: list  # list[Violation]

    def tags(self):
        return {v.constraint for v in self.violations}


def _required_stops(request: Request, assign: Assignment):
    """(vehicle, action, node) triples the assignment demands for this request."""
    if isinstance(assign, Direct):
        return [
            (assign.vehicle, Action.PICKUP, request.pickup),
            (assign.vehicle, Action.DELIVERY, request.delivery),
        ]
    return [
        (assign.first_vehicle, Action.PICKUP, request.pickup),
        (assign.first_vehicle, Action.TRANSFER_DROP, assign.transfer),
        (assign.second_vehicle, Action.TRANSFER_PICK, assign.transfer),
        (assign.second_vehicle, Action.DELIVERY, request.delivery),
    ]


def check_feasibility(instance: Instance, solution: Solution) -> FeasibilityReport:
    """Evaluate every constraint family and report each violation found.

    Never raises on malformed-but-parseable solutions: all problems become
    violations in the report.
    """
    v: list = []

    def add(tag, detail):
        v.append(Violation(tag, detail))

    requests = {r.id: r for r in instance.requests}
    vehicles = {veh.id: veh for veh in instance.vehicles}
    n = instance.n_nodes

    # Route set must cover the fleet exactly.
    seen_vehicles = [r.vehicle for r in solution.routes]
    for vid in vehicles:
        if seen_vehicles.count(vid) != 1:
            add(Constraint.VISIT, f"vehicle {vid} has {seen_vehicles.count(vid)} routes")
    for vid in seen_vehicles:
        if vid not in vehicles:
            add(Constraint.VISIT, f"route for unknown vehicle {vid}")

    structurally_ok = True
    for route in solution.routes:
        veh = vehicles.get(route.vehicle)
        if veh is None:
            structurally_ok = False
            continue
        if len(route.stops) < 2 or route.stops[0].action is not Action.DEPART_DEPOT or route.stops[0].node != veh.start_depot:
            add(Constraint.DEPOT_START, f"vehicle {veh.id} does not start at its depot")
            structurally_ok = False
        if len(route.stops) < 2 or route.stops[-1].action is not Action.ARRIVE_DEPOT or route.stops[-1].node != veh.end_depot:
            add(Constraint.DEPOT_END, f"vehicle {veh.id} does not end at its depot")
            structurally_ok = False
        for si, stop in enumerate(route.stops):
            if not (0 <= stop.node < n):
                add(Constraint.VISIT, f"vehicle {veh.id} stop {si}: node {stop.node} out of range")
                structurally_ok = False
            if stop.action in DEPOT_ACTIONS and 0 < si < len(route.stops) - 1:
                add(Constraint.VISIT, f"vehicle {veh.id} stop {si}: depot action inside route")
            if stop.action in REQUEST_ACTIONS and stop.request not in requests:
                add(Constraint.VISIT, f"vehicle {veh.id} stop {si}: unknown request {stop.request}")
                structurally_ok = False

    # Where each (request, action) is actually performed.
    performed: dict = {}
    for route in solution.routes:
        for si, stop in enumerate(route.stops):
            if stop.action in REQUEST_ACTIONS and stop.request in requests:
                performed.setdefault((stop.request, stop.action), []).append((route.vehicle, si, stop))

    # Assignment totality and stop/assignment consistency.
    for rid, req in requests.items():
        assign = solution.assignment.get(rid)
        if assign is None:
            add(Constraint.ASSIGN, f"request {rid} is not assigned to any vehicle")
            for action in REQUEST_ACTIONS:
                for vid, si, _stop in performed.get((rid, action), []):
                    add(Constraint.VISIT, f"vehicle {vid} visits request {rid} ({action.value}) but the request is unassigned")
            continue
        if isinstance(assign, Transferred) and not instance.is_transfer(assign.transfer):
            add(Constraint.VISIT, f"request {rid} routed through non-transfer node {assign.transfer}")
        needed = _required_stops(req, assign)
        needed_actions = {action for (_v, action, _n) in needed}
        for vid_want, action, node_want in needed:
            occ = performed.get((rid, action), [])
            if not occ:
                add(Constraint.ASSIGN, f"request {rid} misses its {action.value} stop")
                add(Constraint.VISIT, f"vehicle {vid_want} assigned request {rid} but never visits node {node_want}")
                continue
            if len(occ) > 1:
                add(Constraint.ASSIGN, f"request {rid} {action.value} performed {len(occ)} times")
            for vid, si, stop in occ:
                if vid != vid_want:
                    add(Constraint.VISIT, f"request {rid} {action.value} done by vehicle {vid}, assigned to {vid_want}")
                elif stop.node != node_want:
                    add(Constraint.VISIT, f"request {rid} {action.value} at node {stop.node}, expected {node_want}")
                if stop.action in (Action.TRANSFER_DROP, Action.TRANSFER_PICK) and stop.transfer not in (None, stop.node):
                    add(Constraint.VISIT, f"request {rid} {action.value}: transfer field {stop.transfer} != node {stop.node}")
        for action in REQUEST_ACTIONS:
            if action not in needed_actions:
                for vid, si, _stop in performed.get((rid, action), []):
                    add(Constraint.VISIT, f"vehicle {vid} performs {action.value} for request {rid}, not part of its assignment")

    # Precedence within routes (index order; times follow from it).
    def first_pos(rid, action):
        occ = performed.get((rid, action), [])
        return occ[0][:2] if occ else None

    for rid, req in requests.items():
        assign = solution.assignment.get(rid)
        if assign is None:
            continue
        if isinstance(assign, Direct):
            p, d = first_pos(rid, Action.PICKUP), first_pos(rid, Action.DELIVERY)
            if p and d and p[0] == d[0] == assign.vehicle and p[1] >= d[1]:
                add(Constraint.PRECEDENCE, f"request {rid}: delivery precedes pickup in vehicle {assign.vehicle}")
        else:
            p, dr = first_pos(rid, Action.PICKUP), first_pos(rid, Action.TRANSFER_DROP)
            pk, d = first_pos(rid, Action.TRANSFER_PICK), first_pos(rid, Action.DELIVERY)
            if p and dr and p[0] == dr[0] == assign.first_vehicle and p[1] >= dr[1]:
                add(Constraint.PRECEDENCE, f"request {rid}: transfer drop precedes pickup in vehicle {p[0]}")
            if pk and d and pk[0] == d[0] == assign.second_vehicle and pk[1] >= d[1]:
                add(Constraint.PRECEDENCE, f"request {rid}: delivery precedes transfer pick in vehicle {pk[0]}")
            if dr and pk and dr[0] == pk[0] and dr[1] >= pk[1]:
                add(Constraint.TRANSFER_SYNC, f"request {rid}: pick precedes drop within vehicle {dr[0]}")

    if not structurally_ok:
        return FeasibilityReport(False, v)

    # Schedule-derived checks.
    try:
        schedule = propagate_schedule(instance, solution)
    except CyclicTransferError as exc:
        add(Constraint.TIME_PROP, f"no schedule exists: {exc}")
        return FeasibilityReport(False, v)

    for ri, route in enumerate(solution.routes):
        veh = vehicles[route.vehicle]
        times, loads = schedule.departure[ri], schedule.load[ri]
        if abs(times[0]) > TOL:
            add(Constraint.CLOCK_ZERO, f"vehicle {veh.id} starts its clock at {times[0]}")
        if loads[0] != 0:
            add(Constraint.LOAD_ZERO, f"vehicle {veh.id} leaves its depot loaded ({loads[0]})")
        for si in range(1, len(route.stops)):
            t_arc = instance.distance(route.stops[si - 1].node, route.stops[si].node)
            if times[si - 1] + t_arc > times[si] + TOL:
                add(Constraint.TIME_PROP, f"vehicle {veh.id} stop {si}: departs before travel completes")
        for si, (t, load) in enumerate(zip(times, loads)):
            if t < -TOL:
                add(Constraint.NONNEG_TIME, f"vehicle {veh.id} stop {si}: negative departure time")
            if load < 0:
                add(Constraint.NONNEG_LOAD, f"vehicle {veh.id} stop {si}: negative load {load}")
            if load > veh.capacity:
                add(Constraint.CAPACITY, f"vehicle {veh.id} stop {si}: load {load} exceeds capacity {veh.capacity}")

    drops, picks = _transfer_positions(solution)
    for rid in sorted(set(drops) & set(picks)):
        (dri, dsi), (pri, psi) = drops[rid], picks[rid]
        t_drop = schedule.departure[dri][dsi]
        t_pick = schedule.departure[pri][psi]
        if t_drop > t_pick + TOL:
            add(Constraint.TRANSFER_SYNC, f"request {rid}: picked up at {t_pick:.6f} before drop at {t_drop:.6f}")

    return FeasibilityReport(not v, v)


def solution_cost(instance: Instance, solution: Solution) -> float:
    """Total distance over all traversed arcs; defined for infeasible solutions too."""
    total = 0.0
    for route in solution.routes:
        stops = route.stops
        for i in range(1, len(stops)):
            total += instance.distance(stops[i - 1].node, stops[i].node)
    return total
