"""Shared fixtures and sample data for tests."""

import math

import pytest

from commutenet import (
    GenerationInputs,
    Municipality,
    MunicipalityRegistry,
    ODMatrix,
    build_distance_provider,
)
from commutenet.synth import SynthConfig, synthesize

# Published exponential constant, 1/m.
SAMPLE_BETA = 1.94e-4


def registry_of(*points):
    """Registry from ``(id, x, y, in_region)`` tuples."""
    return MunicipalityRegistry(Municipality(mid, x, y, flag) for mid, x, y, flag in points)


# One origin "O" and two destinations at 1000 m and 2000 m.
SAMPLE_TWO_CHOICES = (
    ("O", 0.0, 0.0, True),
    ("A", 1000.0, 0.0, False),
    ("B", 0.0, 2000.0, False),
)

# One origin and three destinations at 1000, 2000 and 4000 m.
SAMPLE_THREE_CHOICES = (
    ("O", 0.0, 0.0, True),
    ("A", 1000.0, 0.0, False),
    ("B", 0.0, 2000.0, False),
    ("C", -4000.0, 0.0, False),
)

# Two region municipalities 1000 m apart plus one outside municipality.
SAMPLE_PAIR_WITH_OUTSIDE = (
    ("a", 0.0, 0.0, True),
    ("b", 1000.0, 0.0, True),
    ("x", 0.0, 3000.0, False),
)

# Two origins equidistant from a nearby one-seat destination "near" and a far destination.
SAMPLE_SCHEDULING = (
    ("first", 0.0, 0.0, True),
    ("second", 0.0, 200.0, True),
    ("near", 100.0, 100.0, False),
    ("far", 5000.0, 100.0, False),
)

# A 3-4-5 triangle scaled to meters.
SAMPLE_TRIANGLE = (
    ("p", 1000.0, 2000.0, True),
    ("q", 4000.0, 6000.0, True),
    ("r", 1000.0, 6000.0, True),
)

SAMPLE_S = [[0, 2], [1, 0]]
SAMPLE_R = [[0, 1], [3, 0]]

SAMPLE_FULL = [[0, 1, 2], [1, 0, 0]]
SAMPLE_IN_TOTALS = [3, 2]
SAMPLE_COLLAPSED = [[0, 1, 2], [1, 0, 0], [2, 1, 0]]


def exp_choice(capacities, distances, beta=SAMPLE_BETA):
    weights = [c * math.exp(-beta * d) for c, d in zip(capacities, distances)]
    total = sum(weights)
    return [w / total for w in weights]


def square(ids, flows):
    return ODMatrix(tuple(ids), tuple(ids), flows)


@pytest.fixture()
def pair_registry():
    return registry_of(*SAMPLE_PAIR_WITH_OUTSIDE)


@pytest.fixture()
def small_fixture():
    """A 20-municipality region with 10 outside municipalities, planted at the constant."""
    return synthesize(SynthConfig(n=20, m=30, commuters=1000, beta=SAMPLE_BETA, seed=3))


@pytest.fixture()
def small_inputs(small_fixture):
    registry = small_fixture.registry
    distances = build_distance_provider(registry)
    return GenerationInputs.from_aggregates(registry, distances, small_fixture.aggregates)


@pytest.fixture()
def fixture_dir(tmp_path, small_fixture):
    """The small fixture written to disk; returns the dict of file paths."""
    return small_fixture.write(tmp_path / "fixture")
