"""Benchmark file parsing, randomized instance augmentation and solution serialization.

The input format is the paired pickup-and-delivery benchmark layout: a header
line ``<num_vehicles> <capacity> <speed>`` followed by one row per node,
``<id> <x> <y> <demand> <etw> <ltw> <service> <pickup_idx> <delivery_idx>``,
all base-10 integers. Row 0 is the depot. Time-window and service fields are
parsed and discarded; this toolkit ignores time windows.

:func:`build_instance` turns a parsed file into a transfer-enabled instance:
transfer points are drawn from existing customer nodes, vehicle depots are
either the shared file depot or scattered uniformly over the bounding box of
the nodes, and the fleet size can be fixed, taken from the file header or
drawn at random. All draws come from one seeded generator, so the same
(file, config) pair always yields the same instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

from .errors import ConfigError, ParseError, StructureError
from .model import (
    Action,
    Direct,
    Instance,
    Node,
    NodeKind,
    Request,
    Route,
    Schedule,
    Solution,
    Stop,
    Transferred,
    Vehicle,
)
from .util import rng_for


@dataclass(frozen=True)
class RawRow:
    id: int
    x: int
    y: int
    demand: int
    earliest: int
    latest: int
    service: int
    pickup_sibling: int
    delivery_sibling: int


@dataclass
class RawPdptwFile:
    vehicle_count: int
    capacity: int
    speed: int  # present in the header, unused
    rows: list  # list[RawRow]

    @property
    def customer_count(self) -> int:
        return len(self.rows) - 1


def parse_lilim(text: str) -> RawPdptwFile:
    """Parse a paired pickup-and-delivery benchmark file."""
    lines = text.splitlines()
    numbered = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if len(numbered) < 2:
        raise StructureError("file must contain a header and at least one node row")

    def ints(lineno, line, expect):
        parts = line.split()
        if len(parts) != expect:
            raise ParseError(f"expected {expect} fields, got {len(parts)}", line=lineno)
        try:
            return [int(p) for p in parts]
        except ValueError:
            raise ParseError(f"non-integer field in {parts!r}", line=lineno)

    lineno, header = numbered[0]
    vehicle_count, capacity, speed = ints(lineno, header, 3)
    rows = []
    for lineno, line in numbered[1:]:
        rows.append(RawRow(*ints(lineno, line, 9)))

    if [r.id for r in rows] != list(range(len(rows))):
        raise StructureError("node ids must be dense 0..n-1 in file order")
    if rows[0].demand != 0:
        raise StructureError("row 0 must be the depot (demand 0)")
    pickups = [r for r in rows if r.demand > 0]
    if not pickups:
        raise StructureError("file contains no requests")
    for r in rows[1:]:
        if r.demand == 0:
            raise StructureError(f"customer row {r.id} has zero demand")
    by_id = {r.id: r for r in rows}
    for p in pickups:
        d = by_id.get(p.delivery_sibling)
        if d is None or d.demand != -p.demand or d.pickup_sibling != p.id:
            raise StructureError(f"pickup row {p.id} has no matching delivery sibling")
    n_deliveries = sum(1 for r in rows if r.demand < 0)
    if n_deliveries != len(pickups):
        raise StructureError("pickup and delivery rows are not in bijection")
    return RawPdptwFile(vehicle_count, capacity, speed, rows)


def format_lilim(raw: RawPdptwFile) -> str:
    lines = [f"{raw.vehicle_count}\t{raw.capacity}\t{raw.speed}"]
    for r in raw.rows:
        lines.append(
            f"{r.id}\t{r.x}\t{r.y}\t{r.demand}\t{r.earliest}\t{r.latest}\t{r.service}"
            f"\t{r.pickup_sibling}\t{r.delivery_sibling}"
        )
    return "\n".join(lines) + "\n"


@dataclass
class AugmentationConfig:
    """How to turn a plain pickup-and-delivery file into a transfer-enabled instance.

    ``transfer_count`` is an explicit count or ``"random"`` (1 to 5% of the
    node count). ``vehicle_count`` is an explicit count, ``"file"`` for the
    header value, or ``"random"`` (2 to one vehicle per 8 requests). The seed
    fully determines every draw.
    """

    transfer_count: Union[int, str] = "random"
    vehicle_count: Union[int, str] = "file"
    depot_mode: str = "shared"
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.transfer_count, int):
            if self.transfer_count < 0:
                raise ConfigError("transfer_count must be non-negative")
        elif self.transfer_count != "random":
            raise ConfigError(f"bad transfer_count: {self.transfer_count!r}")
        if isinstance(self.vehicle_count, int):
            if self.vehicle_count < 1:
                raise ConfigError("vehicle_count must be positive")
        elif self.vehicle_count not in ("file", "random"):
            raise ConfigError(f"bad vehicle_count: {self.vehicle_count!r}")
        if self.depot_mode not in ("shared", "scattered"):
            raise ConfigError(f"bad depot_mode: {self.depot_mode!r}")


def build_instance(raw: RawPdptwFile, cfg: AugmentationConfig, name: str = "instance") -> Instance:
    """Deterministically build a transfer-enabled instance from a parsed file."""
    rng = rng_for(cfg.seed, "augment")
    n_file = len(raw.rows)

    # 1. transfer points, sampled from customer nodes (the depot is excluded so
    #    that a relay never coincides with a route's own endpoints)
    if cfg.transfer_count == "random":
        hi = max(1, math.ceil(0.05 * n_file))
        t_count = rng.randint(1, hi)
    else:
        t_count = cfg.transfer_count
    if t_count > n_file:
        raise ConfigError(f"transfer_count {t_count} exceeds node count {n_file}")
    customer_ids = [r.id for r in raw.rows[1:]]
    t_count = min(t_count, len(customer_ids))
    transfer_points = sorted(rng.sample(customer_ids, t_count))

    # 2. fleet size
    requests_n = sum(1 for r in raw.rows if r.demand > 0)
    if cfg.vehicle_count == "file":
        v_count = raw.vehicle_count
    elif cfg.vehicle_count == "random":
        v_count = rng.randint(2, max(2, math.ceil(requests_n / 8)))
    else:
        v_count = cfg.vehicle_count

    nodes = []
    for r in raw.rows:
        if r.id == 0:
            kind = NodeKind.VEHICLE_START
        elif r.demand > 0:
            kind = NodeKind.PICKUP
        else:
            kind = NodeKind.DELIVERY
        nodes.append(Node(r.id, float(r.x), float(r.y), kind))

    # 3. depots
    vehicles = []
    if cfg.depot_mode == "shared":
        for k in range(v_count):
            vehicles.append(Vehicle(k, raw.capacity, 0, 0))
    else:
        xs = [r.x for r in raw.rows]
        ys = [r.y for r in raw.rows]
        lo_x, hi_x, lo_y, hi_y = min(xs), max(xs), min(ys), max(ys)
        for k in range(v_count):
            sx, sy = rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)
            ex, ey = rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)
            start = Node(len(nodes), sx, sy, NodeKind.VEHICLE_START)
            nodes.append(start)
            end = Node(len(nodes), ex, ey, NodeKind.VEHICLE_END)
            nodes.append(end)
            vehicles.append(Vehicle(k, raw.capacity, start.id, end.id))

    requests = []
    for r in raw.rows:
        if r.demand > 0:
            requests.append(Request(len(requests), r.id, r.delivery_sibling, r.demand))

    return Instance(nodes, requests, vehicles, transfer_points, name=name)


# --- solution files ---------------------------------------------------------

_ACTION_TOKENS = {a.value: a for a in Action}


def write_solution(solution: Solution, schedule: Optional[Schedule] = None, cost: Optional[float] = None) -> str:
    """Serialize a solution; schedule values, when given, appear as comments."""
    out = [f"cost {0.0 if cost is None else cost:.9f}"]
    for ri, route in enumerate(solution.routes):
        out.append(f"route {route.vehicle}")
        for si, stop in enumerate(route.stops):
            parts = [f"  {stop.node}", stop.action.value]
            if stop.request is not None:
                parts.append(str(stop.request))
            if stop.transfer is not None:
                parts.append(str(stop.transfer))
            line = " ".join(parts)
            if schedule is not None:
                line += f"  # t={schedule.departure[ri][si]:.3f} load={schedule.load[ri][si]}"
            out.append(line)
    return "\n".join(out) + "\n"


def _derive_assignment(routes):
    """Reconstruct the request assignment implied by the stops.

    Requests whose stop pattern matches no complete assignment are left out;
    the feasibility checker then reports them.
    """
    occ: dict = {}
    for route in routes:
        for si, stop in enumerate(route.stops):
            if stop.request is not None:
                occ.setdefault(stop.request, {}).setdefault(stop.action, []).append((route.vehicle, si, stop))
    assignment = {}
    for rid, acts in sorted(occ.items()):
        single = all(len(lst) == 1 for lst in acts.values())
        if not single:
            continue
        have = set(acts)
        if have == {Action.PICKUP, Action.DELIVERY}:
            (vp, _, _), (vd, _, _) = acts[Action.PICKUP][0], acts[Action.DELIVERY][0]
            if vp == vd:
                assignment[rid] = Direct(vp)
        elif have == {Action.PICKUP, Action.DELIVERY, Action.TRANSFER_DROP, Action.TRANSFER_PICK}:
            vp = acts[Action.PICKUP][0][0]
            vdrop, _, sdrop = acts[Action.TRANSFER_DROP][0]
            vpick, _, spick = acts[Action.TRANSFER_PICK][0]
            vd = acts[Action.DELIVERY][0][0]
            if vp == vdrop and vpick == vd and sdrop.node == spick.node:
                assignment[rid] = Transferred(vp, sdrop.node, vd)
    return assignment


def read_solution(text: str) -> Solution:
    """Parse a solution file back into a :class:`Solution`."""
    routes = []
    cost_seen = False
    current = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "cost":
            if len(parts) != 2:
                raise ParseError("cost line needs exactly one value", line=lineno)
            try:
                float(parts[1])
            except ValueError:
                raise ParseError(f"bad cost value {parts[1]!r}", line=lineno)
            cost_seen = True
        elif parts[0] == "route":
            if len(parts) != 2:
                raise ParseError("route line needs exactly one vehicle id", line=lineno)
            try:
                vid = int(parts[1])
            except ValueError:
                raise ParseError(f"bad vehicle id {parts[1]!r}", line=lineno)
            current = Route(vid, [])
            routes.append(current)
        else:
            if current is None:
                raise ParseError("stop line before any route line", line=lineno)
            if len(parts) < 2:
                raise ParseError("stop line needs a node and an action", line=lineno)
            try:
                node = int(parts[0])
            except ValueError:
                raise ParseError(f"bad node id {parts[0]!r}", line=lineno)
            action = _ACTION_TOKENS.get(parts[1])
            if action is None:
                raise ParseError(f"unknown action {parts[1]!r}", line=lineno)
            request = transfer = None
            extra = parts[2:]
            if action in (Action.PICKUP, Action.DELIVERY):
                if len(extra) != 1:
                    raise ParseError(f"{action.value} needs a request id", line=lineno)
                request = int(extra[0])
            elif action in (Action.TRANSFER_DROP, Action.TRANSFER_PICK):
                if len(extra) != 2:
                    raise ParseError(f"{action.value} needs request and transfer ids", line=lineno)
                request, transfer = int(extra[0]), int(extra[1])
            elif extra:
                raise ParseError(f"{action.value} takes no arguments", line=lineno)
            current.stops.append(Stop(node, action, request, transfer))
    if not cost_seen:
        raise ParseError("missing cost line", line=1)
    if not routes:
        raise ParseError("no routes in file", line=1)
    return Solution(routes, _derive_assignment(routes))
