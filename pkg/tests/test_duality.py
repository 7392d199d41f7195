import numpy as np
import pytest

from src.core.demand import LinearDemand
from src.core.graph import Edge
from src.core.instance import Instance
from src.duality.kkt import edge_dual, kkt_check, subgradient_interval, supply_cost
from src.duality.report import marginal_report
from src.ironing.envelope import iron
from src.core.objective import REVENUE
from src.solver.drivers import solve_dynamic, solve_static
from src.solver.plan import SupplyConstraint
from src.solver.programs import SolverConfig
from src.utils.errors import ValidationError


@pytest.fixture
def coarse():
    return SolverConfig(grid_size=1001, max_segments=40, dynamic_max_segments=40)


def test_subgradient_interval_at_ends():
    env = iron(LinearDemand(intercept=1.0, slope=1.0), 0.0, REVENUE, grid_size=101)
    lo, hi = subgradient_interval(env, 0.0)
    assert lo == pytest.approx(0.99) and hi == float("inf")
    lo, hi = subgradient_interval(env, env.top)
    assert lo == float("-inf") and hi == pytest.approx(-0.99)
    lo, hi = subgradient_interval(env, 0.5)
    assert lo <= 0.0 <= hi


def test_edge_dual_is_max_of_lagrangian():
    env = iron(LinearDemand(intercept=1.0, slope=1.0), 0.0, REVENUE, grid_size=101)
    assert edge_dual(env, 0.0) == pytest.approx(0.25)
    assert edge_dual(env, 2.0) == pytest.approx(0.0)


def test_supply_cost():
    assert supply_cost(1.0, [(0.5, 1.0), (None, 2.0)]) == pytest.approx(1.5)
    assert supply_cost(0.25, [(0.5, 1.0), (None, 2.0)]) == pytest.approx(0.25)
    assert supply_cost(1.0, [(0.5, 1.0)]) == float("inf")


def test_self_loop_passes_with_idle_drivers(self_loop, config):
    outcome = solve_static(self_loop, config)
    report = kkt_check(outcome.instance, outcome.envelopes, outcome.plan, outcome.certificate)
    assert report.passed, report.reasons
    assert report.duality_gap <= 1e-9
    text = marginal_report(outcome.certificate, self_loop.nodes).text
    assert "there are idle drivers" in text
    assert marginal_report(outcome.certificate, self_loop.nodes).uniform


def test_two_node_certificate_and_report(two_node, config):
    outcome = solve_static(two_node, config)
    report = kkt_check(outcome.instance, None, outcome.plan, outcome.certificate)
    assert report.passed, report.reasons
    assert report.primal_objective == pytest.approx(1.5, abs=1e-6)
    assert report.dual_bound == pytest.approx(report.primal_objective, abs=1e-7)
    marginals = marginal_report(outcome.certificate, two_node.nodes)
    assert "all drivers are busy" in marginals.text
    assert not marginals.idle_drivers[0]


def test_three_node_certificate_with_travel_times(three_node, config):
    outcome = solve_static(three_node, config)
    report = kkt_check(outcome.instance, outcome.envelopes, outcome.plan, outcome.certificate)
    assert report.passed, report.reasons
    assert set(report.stationarity) == {e.id for e in outcome.expanded.edges}


def test_multi_period_certificate_uses_its_period(config):
    curves = [LinearDemand(intercept=1.0, slope=1.0), LinearDemand(intercept=3.0, slope=1.0, volume=1.0)]
    inst = Instance(nodes=["A"], edges=[Edge(id="AA", origin="A", destination="A")], demand={"AA": curves})
    outcome = solve_static(inst, config, period=1)
    assert outcome.certificate.period == 1
    report = kkt_check(outcome.instance, None, outcome.plan, outcome.certificate)
    assert report.passed, report.reasons


def test_perturbed_plan_fails(two_node, config):
    outcome = solve_static(two_node, config)
    q = {e: v - 0.05 for e, v in outcome.plan.q[0].items()}
    shrunk = outcome.plan.model_copy(update={"q": [q]})
    report = kkt_check(outcome.instance, None, shrunk, outcome.certificate)
    assert not report.passed
    assert any("stationarity" in r for r in report.reasons)

    q = dict(outcome.plan.q[0])
    q["AB"] += 0.05
    unbalanced = outcome.plan.model_copy(update={"q": [q]})
    report = kkt_check(outcome.instance, None, unbalanced, outcome.certificate)
    assert not report.passed
    assert any("primal infeasible" in r for r in report.reasons)


def test_tampered_multiplier_fails(two_node, config):
    outcome = solve_static(two_node, config)
    cert = outcome.certificate.model_copy(update={"lam": [outcome.certificate.lam[0] * 3]})
    report = kkt_check(outcome.instance, None, outcome.plan, cert)
    assert not report.passed


def test_certificate_must_match_the_instance(two_node, self_loop, config):
    outcome = solve_static(two_node, config)
    with pytest.raises(ValidationError):
        kkt_check(self_loop, None, outcome.plan, outcome.certificate)


@pytest.mark.parametrize(
    "supply",
    [
        SupplyConstraint(),
        SupplyConstraint(kind="total_accumulated"),
        SupplyConstraint(kind="soft", marginal_costs=[(0.5, 0.2), (None, 1.5)]),
    ],
    ids=["per_step", "total_accumulated", "soft"],
)
def test_dynamic_certificates_pass(three_node, coarse, supply):
    w1 = {"A": 0.5, "B": 0.3, "C": 0.2}
    outcome = solve_dynamic(three_node, T=4, w1=w1, supply=supply, config=coarse)
    assert outcome.result.certified
    report = kkt_check(outcome.instance, outcome.envelopes, outcome.plan, outcome.certificate)
    assert report.passed, report.reasons
    assert len(outcome.certificate.lam) == 4


def test_dynamic_report_lists_steps(two_node, coarse):
    outcome = solve_dynamic(two_node, T=3, w1={"A": 0.9, "B": 0.1}, config=coarse)
    marginals = marginal_report(outcome.certificate, two_node.nodes)
    assert len(marginals.idle_drivers) == 3
    assert "step 3" in marginals.text


def random_market(rng):
    params = {e: (rng.uniform(1.0, 3.0), rng.uniform(0.5, 2.0), rng.uniform(0.0, 0.5)) for e in ("AB", "BA", "AA")}
    return Instance(
        nodes=["A", "B"],
        edges=[Edge(id=e, origin=e[0], destination=e[1], cost=c) for e, (_, _, c) in params.items()],
        demand={e: LinearDemand(intercept=a, slope=b, volume=1.0) for e, (a, b, _) in params.items()},
    )


def test_weak_duality_on_random_pairs(config):
    rng = np.random.default_rng(13)
    for _ in range(10):
        outcome = solve_static(random_market(rng), config)
        for _ in range(20):
            # balance forces q_AB = q_BA = x; A holds x + y, B holds x
            x = float(rng.uniform(0.0, 0.5))
            y = float(rng.uniform(0.0, 1.0 - 2 * x))
            plan = outcome.plan.model_copy(update={"q": [{"AB": x, "BA": x, "AA": y}], "w": [{"A": 1.0 - x, "B": x}]})
            cert = outcome.certificate.model_copy(update={
                "lam": [float(rng.uniform(0.0, 3.0))],
                "mu": [{"A": float(rng.uniform(-2.0, 2.0)), "B": float(rng.uniform(-2.0, 2.0))}],
            })
            report = kkt_check(outcome.instance, outcome.envelopes, plan, cert)
            assert report.primal["balance"] <= 1e-9
            assert report.primal_objective <= report.dual_bound + 1e-9


@pytest.mark.parametrize("trials", [10, pytest.param(100, marks=pytest.mark.slow)])
def test_shifted_flow_never_certifies_a_better_plan(trials, config):
    rng = np.random.default_rng(29)
    for _ in range(trials):
        outcome = solve_static(random_market(rng), config)
        edge = str(rng.choice(["AB", "BA", "AA"]))
        q = dict(outcome.plan.q[0])
        q[edge] = max(q[edge] + float(rng.choice([-0.05, 0.05])), 0.0)
        shifted = outcome.plan.model_copy(update={"q": [q]})
        report = kkt_check(outcome.instance, outcome.envelopes, shifted, outcome.certificate)
        assert not report.passed or report.primal_objective <= outcome.plan.objective_value + 1e-9
        if edge != "AA" and q[edge] != outcome.plan.q[0][edge]:
            assert not report.passed
