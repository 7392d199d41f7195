import numpy as np
import pytest

from src.core.demand import LinearDemand
from src.core.graph import Edge, validate_graph
from src.core.instance import Instance, normalize_instance
from src.ironing.envelope import coarsen, iron
from src.solver.drivers import solve_dynamic, solve_static
from src.solver.programs import build_envelopes
from src.transform.expansion import contract_solution, expand, expand_distribution, expand_plan
from src.utils.errors import ValidationError


@pytest.fixture
def two_step():
    curve = LinearDemand(intercept=2.0, slope=1.0, volume=1.0)
    return Instance(
        nodes=["A", "B"],
        edges=[
            Edge(id="AB", origin="A", destination="B", travel_time=2, cost=0.4),
            Edge(id="BA", origin="B", destination="A", travel_time=1),
        ],
        demand={"AB": curve, "BA": curve},
    )


def test_expand_adds_virtual_nodes(two_step):
    expanded, mapping = expand(two_step)
    assert len(expanded.nodes) == 3
    assert len(expanded.edges) == 3
    assert validate_graph(expanded.graph)["valid"]
    assert mapping.chains["AB"] == ["AB#0", "AB#1"]
    assert mapping.chains["BA"] == ["BA"]
    assert expanded.virtual_nodes == ["AB#v1"]
    assert mapping.virtual_node("AB", 1) == "AB#v1"
    chain = [expanded.graph.edge(c) for c in mapping.chains["AB"]]
    assert [(e.origin, e.destination) for e in chain] == [("A", "AB#v1"), ("AB#v1", "B")]
    assert all(e.travel_time == 1 and e.cost == pytest.approx(0.2) for e in chain)
    assert expanded.demand["AB#1"] == two_step.demand["AB"]


def test_unit_travel_times_expand_to_themselves(two_node):
    expanded, mapping = expand(two_node)
    assert expanded.nodes == two_node.nodes
    assert [e.id for e in expanded.edges] == ["AB", "BA"]
    assert mapping.virtual == {}


def test_chain_envelopes_split_the_objective(two_step, config):
    inst = normalize_instance(two_step)
    _, mapping = expand(inst)
    envs = build_envelopes(inst, config, mapping)
    whole = iron(inst.curve("AB"), 0.4, inst.objective, config.grid_size)
    q = np.array([0.3, 0.7])
    pieces = sum(envs[c][0].value_array(q) for c in mapping.chains["AB"])
    assert np.allclose(pieces, whole.value_array(q))


def test_in_transit_mass_lands_on_virtual_nodes(three_node):
    _, mapping = expand(three_node)
    dist = expand_distribution({"A": 0.5, "B": 0.2}, {"CB": [0.1, 0.15], "AB": [0.05]}, mapping)
    assert dist["CB#v2"] == pytest.approx(0.1)  # one step left
    assert dist["CB#v1"] == pytest.approx(0.15)
    assert dist["AB#v1"] == pytest.approx(0.05)
    assert dist["C"] == 0.0
    assert sum(dist.values()) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        expand_distribution({"A": 1.0}, {"AB": [0.1, 0.1]}, mapping)
    with pytest.raises(ValidationError):
        expand_distribution({"A": 1.0}, {"XY": [0.1]}, mapping)
    with pytest.raises(ValidationError):
        expand_distribution({"A": 0.9, "Q": 0.1}, None, mapping)


def test_contracted_plan_keeps_objective_and_mass(three_node, config):
    outcome = solve_static(three_node, config)
    assert outcome.result.certified
    plan = outcome.plan
    assert not plan.unified
    direct = 0.0
    for e in outcome.instance.edges:
        env = coarsen(iron(outcome.instance.curve(e.id), e.cost, outcome.instance.objective, config.grid_size),
                      config.max_segments)
        direct += float(env.value_array(np.array([plan.q[0][e.id]]))[0])
    assert direct == pytest.approx(plan.objective_value, abs=1e-9)
    assert plan.driver_mass(0) == pytest.approx(1.0, abs=1e-9)
    for e in three_node.edges:
        assert len(plan.in_transit[0].get(e.id, [])) == e.travel_time - 1
        # steady state: every pipeline slot carries the edge flow
        assert plan.in_transit[0].get(e.id, []) == pytest.approx([plan.q[0][e.id]] * (e.travel_time - 1), abs=1e-9)


def test_expand_plan_inverts_contraction(three_node, config):
    outcome = solve_static(three_node, config)
    again = expand_plan(outcome.plan, outcome.mapping)
    for key, value in outcome.unified_plan.q[0].items():
        assert again.q[0][key] == pytest.approx(value, abs=1e-9)
    for key, value in outcome.unified_plan.w[0].items():
        assert again.w[0][key] == pytest.approx(value, abs=1e-9)


def test_contract_rejects_infeasible_plans(two_step, config):
    outcome = solve_static(two_step, config)
    q = dict(outcome.unified_plan.q[0])
    q["AB#0"] += 0.3
    broken = outcome.unified_plan.model_copy(update={"q": [q]})
    with pytest.raises(ValidationError):
        contract_solution(broken, outcome.mapping, outcome.expanded)


def test_dynamic_chain_flows_shift_one_step(two_step, config):
    outcome = solve_dynamic(two_step, T=3, w1={"A": 0.5, "B": 0.4}, in_transit={"AB": [0.1]}, config=config)
    assert outcome.result.certified
    unified, plan = outcome.unified_plan, outcome.plan
    # the second leg carries last step's launches, starting with the mass already on the road
    assert unified.q[0]["AB#1"] == pytest.approx(0.1, abs=1e-9)
    for t in range(2):
        assert unified.q[t + 1]["AB#1"] == pytest.approx(unified.q[t]["AB#0"], abs=1e-9)
        assert plan.in_transit[t + 1]["AB"] == pytest.approx([plan.q[t]["AB"]], abs=1e-9)
    for t in range(3):
        assert plan.q[t]["AB"] == pytest.approx(unified.q[t]["AB#0"], abs=1e-12)
    again = expand_plan(plan, outcome.mapping)
    for t in range(3):
        for key, value in unified.q[t].items():
            assert again.q[t][key] == pytest.approx(value, abs=1e-9)
