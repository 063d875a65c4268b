"""Constructive heuristics: cheapest insertion, savings-based route merging,
the transshipment destroy/repair step, and the multistart wrapper around it.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional

from .errors import InsufficientFleet, NoFeasibleInsertion
from .insertion import (
    RouteState,
    apply_direct,
    best_slot,
    direct_leg,
    insert_pair,
    remove_request,
    route_index,
    transfer_legs,
)
from .model import (
    Action,
    Direct,
    Instance,
    Route,
    Solution,
    Stop,
    Transferred,
    check_feasibility,
    empty_solution,
    solution_cost,
)
from .util import rng_for

IMPROVE_EPS = 1e-6


@dataclass(frozen=True)
class InsertionCandidate:
    request: int
    vehicle: int
    pickup_pos: int
    delivery_pos: int
    delta_cost: float

    def key(self):
        return (self.delta_cost, self.request, self.vehicle, self.pickup_pos, self.delivery_pos)


@dataclass(frozen=True)
class Saving:
    i: int
    j: int
    value: float


def _candidate(instance, solution, states, request, vehicle) -> Optional[InsertionCandidate]:
    first, second = direct_leg(request)
    slot = best_slot(instance, states[vehicle.id], vehicle.capacity, first, second, request.quantity)
    if slot is None:
        return None
    i, j, delta = slot
    return InsertionCandidate(request.id, vehicle.id, i, j, delta)


def _insert_candidate(instance, solution, states, cand: InsertionCandidate):
    request = instance.requests[cand.request]
    route = solution.routes[route_index(solution, cand.vehicle)]
    first, second = direct_leg(request)
    insert_pair(route, cand.pickup_pos, cand.delivery_pos, first, second)
    solution.assignment[request.id] = Direct(cand.vehicle)
    states[cand.vehicle] = RouteState.of(instance, route)


def greedy_construct(instance: Instance) -> Solution:
    """Repeatedly perform the globally cheapest feasible direct insertion.

    Ties break on the smallest (request, vehicle, pickup position, delivery
    position). Raises :class:`NoFeasibleInsertion` naming the first request
    that fits no vehicle.
    """
    solution = empty_solution(instance)
    states = {v.id: RouteState.of(instance, r) for v, r in zip(instance.vehicles, solution.routes)}
    unassigned = list(instance.requests)
    cands = {(r.id, v.id): _candidate(instance, solution, states, r, v) for r in unassigned for v in instance.vehicles}
    while unassigned:
        live = [c for c in cands.values() if c is not None]
        if not live:
            raise NoFeasibleInsertion(unassigned[0].id)
        stuck = [r for r in unassigned if all(cands[(r.id, v.id)] is None for v in instance.vehicles)]
        if stuck:
            raise NoFeasibleInsertion(stuck[0].id)
        best = min(live, key=InsertionCandidate.key)
        _insert_candidate(instance, solution, states, best)
        unassigned = [r for r in unassigned if r.id != best.request]
        for v in instance.vehicles:
            cands.pop((best.request, v.id), None)
        for r in unassigned:
            cands[(r.id, best.vehicle)] = _candidate(instance, solution, states, r, instance.vehicles[best.vehicle])
    return solution


def randomized_greedy(instance: Instance, rng: random.Random) -> Solution:
    """Insert the requests one by one in a shuffled order, each at its cheapest slot."""
    order = list(instance.requests)
    rng.shuffle(order)
    solution = empty_solution(instance)
    states = {v.id: RouteState.of(instance, r) for v, r in zip(instance.vehicles, solution.routes)}
    for request in order:
        options = [
            c
            for v in instance.vehicles
            if (c := _candidate(instance, solution, states, request, v)) is not None
        ]
        if not options:
            raise NoFeasibleInsertion(request.id)
        _insert_candidate(instance, solution, states, min(options, key=InsertionCandidate.key))
    return solution


# --- savings merge ----------------------------------------------------------


def _savings_depot(instance: Instance) -> int:
    depots = sorted({v.start_depot for v in instance.vehicles} | {v.end_depot for v in instance.vehicles})
    if len(depots) == 1:
        return depots[0]
    # multiple depots: measure savings against the depot closest to their centroid
    cx = sum(instance.nodes[d].x for d in depots) / len(depots)
    cy = sum(instance.nodes[d].y for d in depots) / len(depots)
    return min(depots, key=lambda d: (math.hypot(instance.nodes[d].x - cx, instance.nodes[d].y - cy), d))


def compute_savings(instance: Instance, depot: int) -> list:
    """Directed savings for appending request j's round trip after request i's."""
    d = instance.metric
    out = []
    for ri in instance.requests:
        for rj in instance.requests:
            if ri.id == rj.id:
                continue
            value = float(d[ri.delivery, depot] + d[depot, rj.pickup] - d[ri.delivery, rj.pickup])
            out.append(Saving(ri.id, rj.id, value))
    out.sort(key=lambda s: (-s.value, s.i, s.j))
    return out


def clarke_wright(instance: Instance) -> Solution:
    """Savings-based sequential route merging adapted to paired requests.

    Each request starts as its own depot round trip; routes are merged by
    concatenating whole pickup-delivery blocks, walking the savings list in
    non-increasing order. Merged routes are then matched to vehicles; more
    routes than vehicles raises :class:`InsufficientFleet`.
    """
    if not instance.requests:
        return empty_solution(instance)
    depot = _savings_depot(instance)
    savings = compute_savings(instance, depot)

    routes = {r.id: [r.id] for r in instance.requests}  # keyed by head request
    head_of = {r.id: r.id for r in instance.requests}
    tail_of = {r.id: r.id for r in instance.requests}

    def merge(head_key, tail_key):
        # route starting at head_key absorbs the route whose head is tail_key
        left, right = routes.pop(head_key), routes.pop(tail_key)
        combined = left + right
        routes[head_key] = combined
        head_of[combined[0]] = head_key
        tail_of[combined[-1]] = head_key
        return head_key

    merged_any = True
    while merged_any:
        merged_any = False
        for key in sorted(routes):
            if key not in routes:
                continue
            current = key
            extended = True
            while extended:
                extended = False
                seq = routes[current]
                first, last = seq[0], seq[-1]
                for s in savings:
                    if s.i == last and s.j in routes and routes[s.j][0] == s.j and s.j != current:
                        current = merge(current, s.j)
                        extended = merged_any = True
                        break
                    if s.j == first and s.i in tail_of and tail_of[s.i] in routes and tail_of[s.i] != current:
                        other = tail_of[s.i]
                        if routes[other][-1] == s.i:
                            current = merge(other, current)
                            extended = merged_any = True
                            break

    merged = sorted(routes.values(), key=lambda seq: seq[0])
    if len(merged) > len(instance.vehicles):
        raise InsufficientFleet(len(merged), len(instance.vehicles))

    peak = lambda seq: max(instance.requests[rid].quantity for rid in seq)
    merged.sort(key=lambda seq: (-peak(seq), seq[0]))
    fleet = sorted(instance.vehicles, key=lambda v: (-v.capacity, v.id))
    solution = empty_solution(instance)
    for seq, vehicle in zip(merged, fleet):
        if peak(seq) > vehicle.capacity:
            heavy = max((instance.requests[rid] for rid in seq), key=lambda r: r.quantity)
            raise NoFeasibleInsertion(heavy.id)
        route = solution.routes[route_index(solution, vehicle.id)]
        body = []
        for rid in seq:
            body.extend(direct_leg(instance.requests[rid]))
            solution.assignment[rid] = Direct(vehicle.id)
        route.stops = [route.stops[0]] + body + [route.stops[-1]]
    return solution


# --- transshipment ----------------------------------------------------------


def _best_direct(instance, base, request):
    results = []
    for vehicle in instance.vehicles:
        route = base.routes[route_index(base, vehicle.id)]
        state = RouteState.of(instance, route)
        first, second = direct_leg(request)
        slot = best_slot(instance, state, vehicle.capacity, first, second, request.quantity)
        if slot:
            i, j, delta = slot
            results.append((delta, vehicle.id, i, j))
    if not results:
        return None
    delta, vid, i, j = min(results)
    return apply_direct(base, instance, request, vid, i, j), delta


def _positions_of(route, request_id, action):
    for idx, stop in enumerate(route.stops):
        if stop.request == request_id and stop.action is action:
            return idx
    return None


def _insert_leg(instance, solution, request, leg, vehicle_id, i, j, transfer):
    out = solution.copy()
    insert_pair(out.routes[route_index(out, vehicle_id)], i, j, leg[0], leg[1])
    prev = out.assignment.get(request.id)
    if leg[0].action is Action.PICKUP:  # first leg
        second_vehicle = prev.second_vehicle if isinstance(prev, Transferred) else vehicle_id
        out.assignment[request.id] = Transferred(vehicle_id, transfer, second_vehicle)
    else:
        first_vehicle = prev.first_vehicle if isinstance(prev, Transferred) else vehicle_id
        out.assignment[request.id] = Transferred(first_vehicle, transfer, vehicle_id)
    return out


def _best_leg_placement(instance, solution, request, leg, transfer, partner_constraint=None):
    """Cheapest placement of one transfer leg over all vehicles.

    `partner_constraint` is ("after_drop", vehicle, idx) or ("before_pick",
    vehicle, idx) and restricts slots when inserting into the partner's route.
    """
    results = []
    for vehicle in instance.vehicles:
        route = solution.routes[route_index(solution, vehicle.id)]
        state = RouteState.of(instance, route)
        min_first, max_second = 1, None
        if partner_constraint is not None and partner_constraint[1] == vehicle.id:
            if partner_constraint[0] == "after_drop":
                min_first = partner_constraint[2] + 1
            else:
                max_second = partner_constraint[2]
        slot = best_slot(instance, state, vehicle.capacity, leg[0], leg[1], request.quantity, min_first, max_second)
        if slot:
            i, j, delta = slot
            results.append((delta, vehicle.id, i, j))
    if not results:
        return None
    delta, vid, i, j = min(results)
    return _insert_leg(instance, solution, request, leg, vid, i, j, transfer), delta


def _split_candidates(instance, base, base_cost, request):
    """Both sequential orders of inserting the two relay legs, per transfer point."""
    out = []
    for t in instance.transfer_points:
        first_leg, second_leg = transfer_legs(request, t)
        # drop leg first, then pick leg constrained to come after the drop
        placed = _best_leg_placement(instance, base, request, first_leg, t)
        if placed:
            mid, d1 = placed
            drop_vehicle = mid.assignment[request.id].first_vehicle
            drop_idx = _positions_of(mid.routes[route_index(mid, drop_vehicle)], request.id, Action.TRANSFER_DROP)
            done = _best_leg_placement(
                instance, mid, request, second_leg, t, ("after_drop", drop_vehicle, drop_idx)
            )
            if done:
                out.append((base_cost + d1 + done[1], 1, t, done[0]))
        # pick leg first, then drop leg constrained to land before the pick
        placed = _best_leg_placement(instance, base, request, second_leg, t)
        if placed:
            mid, d2 = placed
            pick_vehicle = mid.assignment[request.id].second_vehicle
            pick_idx = _positions_of(mid.routes[route_index(mid, pick_vehicle)], request.id, Action.TRANSFER_PICK)
            done = _best_leg_placement(
                instance, mid, request, first_leg, t, ("before_pick", pick_vehicle, pick_idx)
            )
            if done:
                out.append((base_cost + d2 + done[1], 2, t, done[0]))
    return out


def transship_improve(instance: Instance, solution: Solution) -> Solution:
    """One pass of the relay destroy/repair step.

    Every request in turn is removed and reinserted at the cheapest of: best
    direct placement, best split through each transfer point inserting the
    pickup-side leg first, and the same with the delivery-side leg first. The
    incumbent placement is kept when nothing beats it, so the cost never
    increases. Candidates that would deadlock route clocks are discarded.
    """
    current = solution
    current_cost = solution_cost(instance, current)
    for request in instance.requests:
        base = remove_request(current, request.id)
        base_cost = solution_cost(instance, base)
        candidates = [(current_cost, 0, -1, current)]
        direct = _best_direct(instance, base, request)
        if direct:
            candidates.append((base_cost + direct[1], 0, -2, direct[0]))
        candidates.extend(_split_candidates(instance, base, base_cost, request))
        for cost, _tag, _t, cand in sorted(candidates, key=lambda c: (c[0], c[1], c[2])):
            if cand is current or check_feasibility(instance, cand).feasible:
                current, current_cost = cand, cost
                break
    return current


def transship_to_fixpoint(instance: Instance, solution: Solution, max_passes: int = 50) -> Solution:
    cost = solution_cost(instance, solution)
    for _ in range(max_passes):
        solution = transship_improve(instance, solution)
        new_cost = solution_cost(instance, solution)
        if cost - new_cost < IMPROVE_EPS:
            break
        cost = new_cost
    return solution


def multistart(instance: Instance, starts: int = 16, seed: int = 0) -> Solution:
    """Best of `starts` shuffled-insertion constructions, each repaired to a relay fixpoint."""
    if starts < 1:
        raise ValueError("starts must be >= 1")
    best = None
    best_cost = math.inf
    failure = None
    for s in range(starts):
        rng = rng_for(seed, "multistart", s)
        try:
            candidate = randomized_greedy(instance, rng)
        except NoFeasibleInsertion as exc:
            failure = exc
            continue
        candidate = transship_to_fixpoint(instance, candidate)
        cost = solution_cost(instance, candidate)
        if cost < best_cost - 1e-12:
            best, best_cost = candidate, cost
    if best is None:
        raise failure or NoFeasibleInsertion(-1, "all starts failed")
    return best
