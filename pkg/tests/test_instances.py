from __future__ import annotations

import json

import pytest

from dvrp import (ParseError, SchemaViolation, generate_case2_analog,
                  generate_instance, instance_from_json, instance_to_json,
                  load_instance, save_instance)


def _valid_doc():
    return {
        "name": "t",
        "depot": {"x": 0, "y": 0},
        "fleet": {"count": 2, "capacity": 70, "speed": 1.0},
        "customers": [
            {"id": 1, "x": 1, "y": 2, "demand": 3},
            {"id": 2, "x": 4, "y": 5, "demand": 6},
        ],
        "events": [],
    }


def test_round_trips_through_json():
    inst = instance_from_json(_valid_doc())
    assert instance_from_json(instance_to_json(inst)) == inst


def test_unknown_key_rejected():
    doc = _valid_doc()
    doc["surprise"] = 1
    with pytest.raises(SchemaViolation):
        instance_from_json(doc)


def test_unknown_customer_key_rejected():
    doc = _valid_doc()
    doc["customers"][0]["priority"] = 5
    with pytest.raises(SchemaViolation):
        instance_from_json(doc)


def test_bool_is_not_a_number():
    doc = _valid_doc()
    doc["customers"][0]["demand"] = True
    with pytest.raises(SchemaViolation):
        instance_from_json(doc)


def test_demand_above_capacity_rejected():
    doc = _valid_doc()
    doc["customers"][0]["demand"] = 80
    with pytest.raises(SchemaViolation):
        instance_from_json(doc)


def test_truncated_file_is_parse_error(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text(json.dumps(_valid_doc())[:40])
    with pytest.raises(ParseError):
        load_instance(p)


def test_missing_file_is_io_error(tmp_path):
    from dvrp import IoError
    with pytest.raises(IoError):
        load_instance(tmp_path / "absent.json")


def test_save_load_save_is_byte_identical(tmp_path):
    inst = generate_instance("regen", n_static=12, n_dynamic=6, event_count=2,
                             seed=11, vehicles=3, capacity=40.0)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_instance(inst, a)
    save_instance(load_instance(a), b)
    assert a.read_bytes() == b.read_bytes()


def test_generation_is_deterministic():
    x = generate_instance("g", n_static=20, n_dynamic=4, event_count=2, seed=5)
    y = generate_instance("g", n_static=20, n_dynamic=4, event_count=2, seed=5)
    z = generate_instance("g", n_static=20, n_dynamic=4, event_count=2, seed=6)
    assert x == y
    assert x != z


def test_generated_demands_cycle():
    inst = generate_instance("g", n_static=9, seed=0)
    assert [c.demand for c in inst.customers] == [1, 2, 3] * 3


def test_generated_events_split_evenly():
    inst = generate_instance("g", n_static=10, n_dynamic=7, event_count=3,
                             seed=2)
    sizes = [len(e.customers) for e in inst.events]
    assert sorted(sizes, reverse=True) == sizes   # remainder lands earliest
    assert sum(sizes) == 7
    assert max(sizes) - min(sizes) <= 1
    times = [e.time for e in inst.events]
    assert times == sorted(times)
    assert all(t > 0 for t in times)


def test_case1_shape(case1):
    assert len(case1.customers) == 100
    assert case1.fleet.vehicle_count == 4
    assert case1.fleet.capacity == 70.0
    assert (case1.depot.x, case1.depot.y) == (50.0, 50.0)
    dynamic = [c for e in case1.events for c in e.customers]
    assert len(dynamic) == 20
    assert [e.time for e in case1.events] == [13.0, 31.0, 45.0, 51.0, 66.0]
    assert sum(c.demand for c in case1.customers) == 197.0
    assert sum(c.demand for c in dynamic) == 46.0
    ids = sorted(c.id for c in case1.all_customers())
    assert ids == list(range(1, 121))


def test_case2_analog_shape():
    inst = generate_case2_analog(seed=0)
    assert len(inst.customers) == 100
    assert sum(len(e.customers) for e in inst.events) == 100
    assert inst.fleet.capacity == 125.0
    assert inst.fleet.vehicle_count == 4
    assert generate_case2_analog(seed=0) == inst
