from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))   # makes oracles importable

from dvrp import (Customer, FleetSpec, Instance, Point, build_distance_matrix,
                  generate_instance, load_case1)


def make_instance(coords, demands, capacity, vehicles,
                  depot=(0.0, 0.0), speed=1.0, name="test"):
    customers = tuple(
        Customer(id=i + 1, location=Point(float(x), float(y)),
                 demand=float(d))
        for i, ((x, y), d) in enumerate(zip(coords, demands)))
    return Instance(name=name, depot=Point(*depot),
                    fleet=FleetSpec(vehicle_count=vehicles,
                                    capacity=float(capacity), speed=speed),
                    customers=customers)


@pytest.fixture(scope="session")
def case1():
    return load_case1()


@pytest.fixture(scope="session")
def small_instance():
    # 10 customers in two spatial groups, comfortably feasible with 3 vehicles
    return generate_instance("small", n_static=10, seed=7, vehicles=3,
                             capacity=30.0)


@pytest.fixture
def square4():
    # unit square corners around a centered depot
    return make_instance(
        coords=[(0, 0), (10, 0), (10, 10), (0, 10)],
        demands=[1, 1, 1, 1], capacity=10, vehicles=1, depot=(5.0, 5.0))


def matrix_of(instance):
    return build_distance_matrix(instance.depot,
                                 list(instance.all_customers()))
