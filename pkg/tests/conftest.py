import os

import pytest

from src.core.demand import LinearDemand, StepDemand
from src.core.graph import Edge
from src.core.instance import Instance, save_instance
from src.solver.programs import SolverConfig
from src.utils.config import reset_settings


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    for key in list(os.environ):
        if key.startswith("FLEETFLOW_"):
            monkeypatch.delenv(key)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def config():
    """Grid with q = 0.5 on it and no coarsening."""
    return SolverConfig(grid_size=1001, max_segments=2000, dynamic_max_segments=2000)


@pytest.fixture
def self_loop():
    return Instance(
        nodes=["A"],
        edges=[Edge(id="AA", origin="A", destination="A")],
        demand={"AA": LinearDemand(intercept=1.0, slope=1.0)},
    )


@pytest.fixture
def two_node():
    """D(p) = min(1, 2 - p) both ways: q = 0.5 each, value 1.5, lambda = 1."""
    curve = LinearDemand(intercept=2.0, slope=1.0, volume=1.0)
    return Instance(
        nodes=["A", "B"],
        edges=[Edge(id="AB", origin="A", destination="B"), Edge(id="BA", origin="B", destination="A")],
        demand={"AB": curve, "BA": curve},
    )


@pytest.fixture
def asymmetric():
    """Strong demand A->B, weak B->A; a fixed price of 3.5 strands drivers at B."""
    return Instance(
        nodes=["A", "B"],
        edges=[
            Edge(id="AB", origin="A", destination="B", minutes=1.0),
            Edge(id="BA", origin="B", destination="A", minutes=1.0),
        ],
        demand={
            "AB": LinearDemand(intercept=4.0, slope=1.0, volume=1.0),
            "BA": LinearDemand(intercept=1.0, slope=1.0),
        },
    )


@pytest.fixture
def three_node():
    """Travel times 1, 2 and 3 with step curves that need ironing."""
    return Instance(
        nodes=["A", "B", "C"],
        edges=[
            Edge(id="AB", origin="A", destination="B", travel_time=2, cost=0.1),
            Edge(id="BA", origin="B", destination="A", travel_time=1),
            Edge(id="BC", origin="B", destination="C", travel_time=1, cost=0.05),
            Edge(id="CB", origin="C", destination="B", travel_time=3),
            Edge(id="CA", origin="C", destination="A", travel_time=1),
            Edge(id="AC", origin="A", destination="C", travel_time=2),
        ],
        demand={
            "AB": StepDemand(atoms=[(3.0, 0.3), (1.0, 0.5)]),
            "BA": LinearDemand(intercept=2.0, slope=1.0, volume=1.0),
            "BC": LinearDemand(intercept=3.0, slope=2.0),
            "CB": LinearDemand(intercept=1.5, slope=1.0),
            "CA": LinearDemand(intercept=2.5, slope=1.5),
            "AC": StepDemand(atoms=[(2.0, 0.4), (0.5, 0.4)]),
        },
    )


@pytest.fixture
def instance_file(tmp_path, asymmetric):
    path = tmp_path / "instance.json"
    save_instance(asymmetric, path)
    return path


@pytest.fixture
def hub():
    """
    Four outer regions feeding a hub: strong demand in, weak demand back out.
    Plan: 0.125 each way per pair, value 3.3125. A fixed price of 3.5 leaves
    most drivers waiting at the hub.
    """
    outer = ["R2", "R3", "R4", "R5"]
    edges, demand = [], {}
    for r in outer:
        edges.append(Edge(id=f"{r}-R1", origin=r, destination="R1", minutes=1.0))
        edges.append(Edge(id=f"R1-{r}", origin="R1", destination=r, minutes=1.0))
        demand[f"{r}-R1"] = LinearDemand(intercept=4.0, slope=1.0, volume=1.0)
        demand[f"R1-{r}"] = LinearDemand(intercept=0.4, slope=0.1)
    return Instance(nodes=["R1", *outer], edges=edges, demand=demand)
