"""Instance JSON I/O and the random instance generator.

The on-disk schema is strict: exactly the documented keys, no extras.
save/load round-trips byte-identically for a given instance, and the
generator is fully determined by its arguments, so regenerating with the
same seed reproduces the same file.
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import Customer, Event, FleetSpec, InputError, Instance, Point

DEFAULT_DEPOT = Point(50.0, 50.0)
DEFAULT_SPEED = 1.0


class ParseError(InputError):
    """The file is not valid JSON."""


class SchemaViolation(InputError):
    """Valid JSON that does not match the instance schema."""


class IoError(InputError):
    """The file could not be read or written."""


def _require_keys(obj: dict, required: dict[str, type | tuple],
                  optional: dict[str, type | tuple], where: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaViolation(f"{where}: expected an object")
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise SchemaViolation(f"{where}: unknown keys {sorted(unknown)}")
    for key, typ in required.items():
        if key not in obj:
            raise SchemaViolation(f"{where}: missing key {key!r}")
        if not isinstance(obj[key], typ) or isinstance(obj[key], bool):
            raise SchemaViolation(f"{where}: key {key!r} has wrong type")
    for key, typ in optional.items():
        if key in obj and (not isinstance(obj[key], typ)
                           or isinstance(obj[key], bool)):
            raise SchemaViolation(f"{where}: key {key!r} has wrong type")


_NUM = (int, float)


def _customer_from_json(obj: dict, where: str, arrival: float = 0.0) -> Customer:
    _require_keys(obj, {"id": int, "x": _NUM, "y": _NUM, "demand": _NUM}, {}, where)
    return Customer(id=obj["id"], location=Point(float(obj["x"]), float(obj["y"])),
                    demand=float(obj["demand"]), arrival_time=arrival)


def instance_from_json(data) -> Instance:
    _require_keys(
        data,
        {"name": str, "depot": dict, "fleet": dict, "customers": list},
        {"events": list},
        "instance",
    )
    _require_keys(data["depot"], {"x": _NUM, "y": _NUM}, {}, "depot")
    _require_keys(data["fleet"], {"count": int, "capacity": _NUM, "speed": _NUM},
                  {}, "fleet")
    try:
        customers = tuple(
            _customer_from_json(c, f"customers[{i}]")
            for i, c in enumerate(data["customers"])
        )
        events = []
        for i, ev in enumerate(data.get("events", [])):
            _require_keys(ev, {"time": _NUM, "customers": list}, {}, f"events[{i}]")
            members = tuple(
                _customer_from_json(c, f"events[{i}].customers[{j}]",
                                    float(ev["time"]))
                for j, c in enumerate(ev["customers"])
            )
            events.append(Event(time=float(ev["time"]), customers=members))
        return Instance(
            name=data["name"],
            depot=Point(float(data["depot"]["x"]), float(data["depot"]["y"])),
            fleet=FleetSpec(vehicle_count=data["fleet"]["count"],
                            capacity=float(data["fleet"]["capacity"]),
                            speed=float(data["fleet"]["speed"])),
            customers=customers,
            events=tuple(events),
        )
    except ValueError as exc:
        raise SchemaViolation(str(exc)) from exc


def instance_to_json(instance: Instance) -> dict:
    def num(value: float):
        as_float = float(value)
        return int(as_float) if as_float.is_integer() else as_float

    def cust(c: Customer) -> dict:
        return {"id": c.id, "x": num(c.location.x), "y": num(c.location.y),
                "demand": num(c.demand)}

    out = {
        "name": instance.name,
        "depot": {"x": num(instance.depot.x), "y": num(instance.depot.y)},
        "fleet": {"count": instance.fleet.vehicle_count,
                  "capacity": num(instance.fleet.capacity),
                  "speed": num(instance.fleet.speed)},
        "customers": [cust(c) for c in instance.customers],
    }
    if instance.events:
        out["events"] = [
            {"time": num(ev.time), "customers": [cust(c) for c in ev.customers]}
            for ev in instance.events
        ]
    return out


def load_instance(path: str | Path) -> Instance:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return instance_from_json(data)


def save_instance(instance: Instance, path: str | Path) -> None:
    text = json.dumps(instance_to_json(instance), indent=2) + "\n"
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_case1() -> Instance:
    """The packaged 100 + 20 customer benchmark instance."""
    text = resources.files("dvrp").joinpath("data/case1.json").read_text()
    return instance_from_json(json.loads(text))


def generate_instance(
    name: str,
    n_static: int,
    n_dynamic: int = 0,
    event_count: int = 0,
    seed: int = 0,
    vehicles: int = 4,
    capacity: float = 100.0,
    speed: float = DEFAULT_SPEED,
    depot: Point = DEFAULT_DEPOT,
    grid: int = 100,
    demand_cycle: Sequence[int] = (1, 2, 3),
    event_times: Sequence[float] | None = None,
    horizon: tuple[float, float] = (10.0, 80.0),
) -> Instance:
    """Uniform integer coordinates on [0, grid]^2, demands cycling in id order.

    Dynamic customers are split as evenly as possible over the events; event
    times are either given explicitly or spaced evenly inside the horizon.
    """
    if n_dynamic > 0 and event_count == 0 and event_times is None:
        raise ValueError("dynamic customers need events")
    rng = np.random.default_rng(seed)
    total = n_static + n_dynamic
    coords = rng.integers(0, grid + 1, size=(total, 2))

    def make(i: int, arrival: float) -> Customer:
        return Customer(id=i + 1, location=Point(float(coords[i, 0]),
                                                 float(coords[i, 1])),
                        demand=float(demand_cycle[i % len(demand_cycle)]),
                        arrival_time=arrival)

    static = tuple(make(i, 0.0) for i in range(n_static))
    events: list[Event] = []
    if n_dynamic > 0:
        if event_times is None:
            lo, hi = horizon
            k = event_count
            event_times = [round(lo + (j + 1) * (hi - lo) / (k + 1), 1)
                           for j in range(k)]
        k = len(event_times)
        base, extra = divmod(n_dynamic, k)
        idx = n_static
        for j, t in enumerate(event_times):
            batch = base + (1 if j < extra else 0)
            members = tuple(make(idx + b, float(t)) for b in range(batch))
            idx += batch
            events.append(Event(time=float(t), customers=members))
    return Instance(
        name=name,
        depot=depot,
        fleet=FleetSpec(vehicle_count=vehicles, capacity=capacity, speed=speed),
        customers=static,
        events=tuple(events),
    )


def generate_case2_analog(seed: int = 0) -> Instance:
    """A stand-in for the larger dynamic case: 100 static + 100 dynamic,
    4 vehicles of capacity 125, arrivals at the same five instants as the
    packaged case."""
    return generate_instance(
        name=f"case2-analog-{seed}",
        n_static=100,
        n_dynamic=100,
        seed=seed,
        vehicles=4,
        capacity=125.0,
        event_times=(13, 31, 45, 51, 66),
    )
