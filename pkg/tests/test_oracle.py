import numpy as np
import pytest

from proxalloc.errors import ScaleTooLarge
from proxalloc.graph import Digraph
from proxalloc.oracle import solve_grid, solve_subgradient
from proxalloc.problem import AgentSpec, NetworkProblem, QuadraticCost, objective
from proxalloc.prox import BallIndicator, BoxIndicator, ZeroTerm

TWO_CYCLE = np.array([[0.0, 1.0], [1.0, 0.0]])


def test_grid_finds_tiny_optimum(tiny_grid):
    # analytic optimum of the tiny instance is x = (-0.25, 0.25)
    spacing = tiny_grid.certificate["spacing"][0]
    assert abs(tiny_grid.x_star[0, 0] - (-0.25)) <= spacing
    assert abs(tiny_grid.x_star[1, 0] - 0.25) <= spacing
    assert tiny_grid.certificate["feasibility_gap"] <= 1e-12
    assert tiny_grid.certificate["best_neighbor_gap"] >= 0.0


def test_grid_reports_ties():
    agents = [AgentSpec(q=1, grad_f0=lambda x: 0.0 * x, c=1.0,
                        terms=[BoxIndicator(lower=np.array([-2.0]),
                                            upper=np.array([2.0])),
                               ZeroTerm()],
                        d=np.zeros(1), f0_value=lambda x: 0.0)
              for _ in range(2)]
    p = NetworkProblem(agents, Digraph(TWO_CYCLE))
    res = solve_grid(p, (-1.0, 1.0), 5)
    assert res.F_star == 0.0
    assert res.certificate["ties"] == 5        # every feasible point ties
    # lexicographic tie break: smallest grid point wins
    assert res.x_star[0, 0] == -1.0


def test_grid_no_feasible_point():
    # balls around 0 with radius 0.5 cannot reach sum(x) = 10
    agents = [AgentSpec(q=1, grad_f0=lambda x: 2.0 * x, c=2.0,
                        terms=[BallIndicator(center=np.zeros(1), radius=0.5),
                               ZeroTerm()],
                        d=np.array([5.0]), f0_value=lambda x: float(x @ x))
              for _ in range(2)]
    p = NetworkProblem(agents, Digraph(TWO_CYCLE))
    res = solve_grid(p, (-5.0, 5.0), 50)
    assert res.x_star is None
    assert res.F_star == np.inf
    assert res.certificate.get("no_feasible_point")


def test_grid_scale_caps():
    agents = [AgentSpec.quadratic(QuadraticCost(2.0, np.zeros(1)),
                                  [ZeroTerm(), ZeroTerm()], np.zeros(1))
              for _ in range(8)]
    ring = np.zeros((8, 8))
    for i in range(8):
        ring[(i + 1) % 8, i] = 1.0
        ring[i, (i + 1) % 8] = 1.0
    p = NetworkProblem(agents, Digraph(ring))
    with pytest.raises(ScaleTooLarge):
        solve_grid(p, (-1.0, 1.0), 10)      # free dim 7 > 6
    small = NetworkProblem(agents[:2], Digraph(TWO_CYCLE))
    with pytest.raises(ScaleTooLarge):
        solve_grid(small, (-1.0, 1.0), 500)  # resolution cap


def test_subgradient_smooth_only_matches_closed_form():
    # minimize sum_i a_i ||x_i - s_i||^2 s.t. sum x = sum d has the closed
    # form x_i = s_i + v0/(2 a_i), v0 = (sum d - sum s)/sum(1/(2 a_i))
    scales = [1.0, 2.0, 4.0]
    centers = [np.array([1.0, -1.0]), np.array([0.0, 2.0]), np.array([3.0, 0.5])]
    d = [np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([1.0, 1.0])]
    agents = [AgentSpec.quadratic(QuadraticCost(a, c), [ZeroTerm(), ZeroTerm()], dv)
              for a, c, dv in zip(scales, centers, d)]
    ring = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    p = NetworkProblem(agents, Digraph(ring))

    total = sum(d) - sum(centers)
    v0 = total / sum(1.0 / (2.0 * a) for a in scales)
    x_closed = np.stack([c + v0 / (2.0 * a) for a, c in zip(scales, centers)])

    res = solve_subgradient(p, np.zeros((3, 2)), 100000)
    assert np.linalg.norm(res.x_star - x_closed) <= 1e-4
    assert res.certificate["feasibility_gap"] <= 1e-8


def test_subgradient_monotone_best_trace(s5_oracle):
    trace = s5_oracle.certificate["best_trace"]
    assert all(trace[k + 1] <= trace[k] for k in range(len(trace) - 1))
    assert s5_oracle.certificate["feasibility_gap"] <= 1e-8
    assert s5_oracle.certificate["indicator_violation"] <= 1e-10


def test_subgradient_stays_near_optimal_start(tiny):
    p = tiny.problem
    x_opt = np.array([[-0.25], [0.25]])
    res = solve_subgradient(p, x_opt, 2000)
    assert res.F_star <= objective(p, x_opt) + 1e-12
    assert np.linalg.norm(res.x_star - x_opt) <= 1e-2


def test_oracles_agree_on_tiny_instance(tiny, tiny_grid):
    sub = solve_subgradient(tiny.problem, tiny.x0, 20000)
    # the grid's resolution limits its accuracy: spacing * local slope
    spacing = tiny_grid.certificate["spacing"][0]
    assert abs(sub.F_star - tiny_grid.F_star) <= 2.0 * spacing


def test_grid_dominates_flow_limit(tiny, tiny_run, tiny_grid):
    # the flow's limit objective beats the grid minimum up to one spacing
    # times a local Lipschitz bound for the tiny instance (|grad f0| <= 12
    # on the sampled box, plus the two unit l1 slopes)
    f_flow = objective(tiny.problem, tiny_run.final_state.x)
    spacing = tiny_grid.certificate["spacing"][0]
    assert f_flow <= tiny_grid.F_star + spacing * 14.0
