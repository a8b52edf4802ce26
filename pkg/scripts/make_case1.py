"""Regenerate the packaged benchmark instance (src/dvrp/data/case1.json).

100 static customers served by 4 vehicles of capacity 70 from a depot at
(50, 50), plus 20 dynamic customers arriving in batches of four at
t = 13, 31, 45, 51 and 66. Dynamic ids continue the static numbering at 101.
"""
from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from dvrp.model import Customer, Event, FleetSpec, Instance, Point
from dvrp.instances import save_instance

STATIC = [
    (1, 19, 94, 1), (2, 24, 69, 2), (3, 37, 89, 3), (4, 12, 100, 1),
    (5, 11, 95, 2), (6, 5, 95, 3), (7, 36, 97, 1), (8, 8, 60, 2),
    (9, 44, 83, 3), (10, 32, 54, 1), (11, 45, 93, 2), (12, 36, 72, 3),
    (13, 11, 66, 1), (14, 31, 57, 2), (15, 16, 76, 3), (16, 34, 63, 1),
    (17, 15, 76, 2), (18, 28, 71, 3), (19, 40, 79, 1), (20, 9, 63, 2),
    (21, 25, 73, 3), (22, 19, 59, 1), (23, 34, 84, 2), (24, 26, 82, 3),
    (25, 13, 50, 1), (26, 51, 29, 2), (27, 8, 30, 3), (28, 14, 33, 1),
    (29, 49, 46, 2), (30, 26, 21, 3), (31, 33, 29, 1), (32, 25, 29, 2),
    (33, 52, 39, 3), (34, 16, 14, 1), (35, 43, 31, 2), (36, 33, 35, 3),
    (37, 25, 12, 1), (38, 2, 1, 2), (39, 49, 23, 3), (40, 9, 36, 1),
    (41, 26, 15, 2), (42, 42, 35, 3), (43, 20, 23, 1), (44, 19, 12, 2),
    (45, 10, 9, 3), (46, 41, 31, 1), (47, 100, 32, 1), (48, 72, 17, 2),
    (49, 93, 46, 3), (50, 97, 37, 1), (51, 58, 15, 2), (52, 89, 14, 3),
    (53, 60, 38, 1), (54, 75, 2, 2), (55, 91, 16, 3), (56, 85, 43, 1),
    (57, 62, 27, 2), (58, 73, 16, 3), (59, 73, 36, 1), (60, 80, 11, 2),
    (61, 66, 14, 3), (62, 94, 15, 1), (63, 61, 39, 2), (64, 86, 28, 3),
    (65, 62, 33, 1), (66, 100, 31, 2), (67, 87, 3, 3), (68, 88, 37, 1),
    (69, 84, 15, 2), (70, 90, 47, 3), (71, 74, 48, 1), (72, 94, 86, 1),
    (73, 52, 63, 2), (74, 64, 79, 3), (75, 91, 66, 1), (76, 76, 93, 2),
    (77, 68, 86, 3), (78, 49, 77, 1), (79, 54, 88, 2), (80, 86, 68, 3),
    (81, 65, 76, 1), (82, 89, 93, 2), (83, 63, 67, 3), (84, 73, 91, 1),
    (85, 64, 66, 2), (86, 72, 57, 3), (87, 54, 92, 1), (88, 55, 57, 2),
    (89, 80, 69, 3), (90, 54, 49, 1), (91, 89, 69, 2), (92, 73, 73, 3),
    (93, 72, 53, 1), (94, 56, 90, 2), (95, 71, 96, 3), (96, 52, 67, 1),
    (97, 73, 58, 2), (98, 76, 92, 3), (99, 68, 50, 1), (100, 53, 53, 2),
]

# (event time, [(id, x, y, demand), ...]); ids continue the static numbering
DYNAMIC = [
    (13, [(101, 41, 71, 2), (106, 31, 51, 3), (111, 65, 20, 3), (116, 60, 60, 3)]),
    (31, [(102, 30, 70, 2), (107, 9, 40, 3), (112, 65, 22, 3), (117, 65, 95, 3)]),
    (45, [(103, 10, 100, 1), (108, 5, 25, 1), (113, 100, 10, 2), (118, 80, 90, 1)]),
    (51, [(104, 25, 90, 2), (109, 5, 10, 2), (114, 100, 20, 3), (119, 85, 85, 2)]),
    (66, [(105, 45, 60, 2), (110, 30, 10, 4), (115, 80, 3, 2), (120, 90, 80, 2)]),
]


def build() -> Instance:
    static = tuple(
        Customer(id=i, location=Point(float(x), float(y)), demand=float(d))
        for i, x, y, d in STATIC
    )
    events = tuple(
        Event(time=float(t), customers=tuple(
            Customer(id=i, location=Point(float(x), float(y)), demand=float(d),
                     arrival_time=float(t))
            for i, x, y, d in rows))
        for t, rows in DYNAMIC
    )
    return Instance(
        name="case1",
        depot=Point(50.0, 50.0),
        fleet=FleetSpec(vehicle_count=4, capacity=70.0, speed=1.0),
        customers=static,
        events=events,
    )


def main() -> None:
    instance = build()
    static_total = sum(c.demand for c in instance.customers)
    dynamic_total = sum(c.demand for ev in instance.events for c in ev.customers)
    assert len(instance.customers) == 100
    assert static_total == 197, static_total
    assert dynamic_total == 46, dynamic_total
    out = Path(__file__).resolve().parents[1] / "src" / "dvrp" / "data" / "case1.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_instance(instance, out)
    print(f"wrote {out} (static demand {static_total}, dynamic {dynamic_total})")


if __name__ == "__main__":
    main()
