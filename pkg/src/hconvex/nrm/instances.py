"""Instance generators: hub-and-spoke passenger networks and the
two-dimensional-capacity cargo network, plus the cargo class table format.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InstanceError
from .model import AIRCARGO, PASSENGER, NrmInstance, ShowUpModel

__all__ = [
    "hub_spoke_passenger",
    "CargoClass",
    "load_cargo_classes",
    "aircargo_instance",
    "cargo_route_options",
]


def hub_spoke_passenger(
    spokes: int,
    fare_ratio: float,
    penalty_delta: float,
    penalty_sigma: float,
    show_up_p: float,
    load_factor: float,
    capacity_cv: float,
    mean_leg_capacity: float = 100.0,
    show_up_kind: str = "binomial",
    x_upper: float = 100.0,
) -> NrmInstance:
    """One hub with the given number of spokes, two fares per itinerary.

    Legs: spoke->hub and hub->spoke for each spoke (2N legs).  Demand
    classes: every ordered origin-destination pair at a low and a high
    fare, 2N(N+1) classes total; spoke-to-spoke itineraries connect
    through the hub and consume two legs.  The rejection penalty per
    class is penalty_delta * fare + penalty_sigma * max fare.  Expected
    demand is split evenly across classes and scaled so that total
    expected leg consumption equals load_factor times total expected
    capacity.  Seat capacity per leg is truncated-Gaussian on [0, inf)
    with the given coefficient of variation.
    """
    n = spokes
    if n < 1:
        raise InstanceError("invalid instance: spokes: need at least one")
    nodes = list(range(n + 1))  # 0 = hub, 1..n = spokes
    legs_out = {s: s - 1 for s in range(1, n + 1)}  # spoke -> hub
    legs_in = {s: n + s - 1 for s in range(1, n + 1)}  # hub -> spoke
    m = 2 * n
    itineraries = []
    for o in nodes:
        for dd in nodes:
            if o == dd:
                continue
            if o == 0:
                legs = (legs_in[dd],)
            elif dd == 0:
                legs = (legs_out[o],)
            else:
                legs = (legs_out[o], legs_in[dd])
            itineraries.append(legs)
    base_fares = [100.0 * len(legs) for legs in itineraries]
    consumption_cols = []
    fares = []
    for legs, fare in zip(itineraries, base_fares):
        col = np.zeros(m)
        for leg in legs:
            col[leg] = 1.0
        for level in (1.0, fare_ratio):
            consumption_cols.append(col)
            fares.append(fare * level)
    a = np.column_stack(consumption_cols)
    fares = np.asarray(fares)
    d = fares.size
    assert d == 2 * n * (n + 1) and a.shape == (m, d)
    total_capacity = m * mean_leg_capacity
    legs_per_class = a.sum(axis=0)
    demand_mean = load_factor * total_capacity / legs_per_class.sum()
    penalties = penalty_delta * fares + penalty_sigma * fares.max()
    return NrmInstance(
        mode=PASSENGER,
        demand_means=np.full(d, demand_mean),
        show_up=ShowUpModel(show_up_kind, show_up_p),
        x_upper=x_upper,
        consumption=a,
        capacity_mean=np.full(m, mean_leg_capacity),
        capacity_cv=capacity_cv,
        revenue=fares,
        penalty=penalties,
    )


@dataclass(frozen=True)
class CargoClass:
    label: int
    mean_weight: float
    mean_volume: float
    origin: int
    destination: int
    per_unit_revenue: float


def load_cargo_classes(path) -> list:
    """Read a cargo class table: delimited text with columns
    (class, mean_weight, mean_volume, origin, destination,
    per_unit_revenue).  Comma or whitespace delimited; a header row is
    skipped if present."""
    text = Path(path).read_text()
    rows = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p for p in line.replace(",", " ").split() if p]
        if len(parts) != 6:
            raise InstanceError(
                f"invalid instance: line {line_no}: expected 6 columns, got {len(parts)}"
            )
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            if line_no == 1:
                continue  # header
            raise InstanceError(f"invalid instance: line {line_no}: non-numeric field")
        rows.append(
            CargoClass(
                label=int(vals[0]),
                mean_weight=vals[1],
                mean_volume=vals[2],
                origin=int(vals[3]),
                destination=int(vals[4]),
                per_unit_revenue=vals[5],
            )
        )
    if not rows:
        raise InstanceError("invalid instance: empty cargo class table")
    return rows


def cargo_route_options(origin: int, destination: int, routing: bool) -> tuple:
    """Feasible routes on the 4-spoke/1-hub cargo network (hub = node 5).

    Legs 0..3 run spoke i+1 -> hub; legs 4..7 run hub -> spoke j+1; leg 8
    is the direct 1 -> 3 link that exists only with routing enabled, in
    which case the (1, 3) market has two route options.
    """
    hub = 5
    if origin == hub:
        return ((4 + destination - 1,),)
    if destination == hub:
        return ((origin - 1,),)
    via_hub = (origin - 1, 4 + destination - 1)
    if routing and (origin, destination) == (1, 3):
        return ((8,), via_hub)
    return (via_hub,)


def aircargo_instance(
    classes,
    cv_demand: float,
    cv_capacity: float,
    load_factor: float,
    routing: bool = False,
    horizon: int = 240,
    theta2: float = 0.6,
    penalty_mult: float = 2.4,
    rho_consumption: float = 0.8,
    rho_capacity: float = 0.8,
    show_up: ShowUpModel = ShowUpModel("all"),
    x_upper: float = 100.0,
) -> NrmInstance:
    """Cargo network instance from a class table.

    All classes arrive with equal probability over the reservation
    horizon, so expected demand per class is horizon / #classes.  Mean
    leg capacities are set so total expected weight (volume) demand is
    load_factor times total weight (volume) capacity, split evenly over
    the legs; with routing enabled the eight hub legs are scaled by 8/9
    and the freed capacity moves to the direct leg.
    """
    problems = []
    if not classes:
        problems.append("classes: empty table")
    if load_factor <= 0:
        problems.append("load_factor: must be positive")
    if cv_demand < 0 or cv_capacity < 0:
        problems.append("cv_demand/cv_capacity: must be nonnegative")
    if problems:
        raise InstanceError("invalid instance: " + "; ".join(problems))
    d = len(classes)
    hub = 5
    for cls in classes:
        ok = 1 <= cls.origin <= hub and 1 <= cls.destination <= hub and cls.origin != cls.destination
        if not ok:
            problems.append(f"class {cls.label}: origin/destination must be distinct nodes 1..5")
        if cls.mean_weight <= 0 or cls.mean_volume <= 0 or cls.per_unit_revenue <= 0:
            problems.append(f"class {cls.label}: weight, volume, revenue must be positive")
    if problems:
        raise InstanceError("invalid instance: " + "; ".join(problems))
    m = 9 if routing else 8
    routes = tuple(
        cargo_route_options(cls.origin, cls.destination, routing) for cls in classes
    )
    demand_mean = np.full(d, horizon / d)
    w_mean = np.array([c.mean_weight for c in classes])
    v_mean = np.array([c.mean_volume for c in classes])
    theta1 = np.array([c.per_unit_revenue for c in classes])
    # expected consumption on the base (no-routing) network, so enabling
    # the direct link redistributes capacity without changing the total
    base_routes = [cargo_route_options(c.origin, c.destination, False) for c in classes]
    legs_per_class = np.array([len(base_routes[i][0]) for i in range(d)])
    total_w = float((demand_mean * w_mean * legs_per_class).sum())
    total_v = float((demand_mean * v_mean * legs_per_class).sum())
    cap_w = np.full(m, total_w / load_factor / 8.0)
    cap_v = np.full(m, total_v / load_factor / 8.0)
    if routing:
        cap_w[:8] *= 8.0 / 9.0
        cap_v[:8] *= 8.0 / 9.0
        cap_w[8] = total_w / load_factor - cap_w[:8].sum()
        cap_v[8] = total_v / load_factor - cap_v[:8].sum()
    return NrmInstance(
        mode=AIRCARGO,
        demand_means=demand_mean,
        show_up=show_up,
        x_upper=x_upper,
        routes=routes,
        n_legs=m,
        weight_mean=w_mean,
        volume_mean=v_mean,
        consumption_cv=cv_demand,
        rho_consumption=rho_consumption,
        capacity_w_mean=cap_w,
        capacity_v_mean=cap_v,
        rho_capacity=rho_capacity,
        theta1=theta1,
        theta2=theta2,
        penalty_mult=penalty_mult,
        demand_kind="poisson",
    )
