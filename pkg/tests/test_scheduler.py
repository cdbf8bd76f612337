import numpy as np
import pytest

from multirail import (ChainSpec, OptimizerConfig, expected_steps, greedy_optimize, run,
                       uniform)
from multirail.protocol import trace_from_probabilities
from multirail.scheduler import golden_max

from conftest import random_chain, spectrum_of


def test_uniform_schedule():
    assert uniform(1.0, 3).intervals == (1.0, 1.0, 1.0)
    assert uniform(1.0, 3).strategy == "uniform"
    with pytest.raises(ValueError):
        uniform(1.0, 0)
    with pytest.raises(ValueError):
        uniform(0.0, 2)


def test_perfect_instant_schedule(xy3):
    tr = run(xy3, 1, uniform(np.pi / np.sqrt(2), 1))
    assert tr.P[-1] == 1.0


@pytest.mark.parametrize("window,grid,tol", [((0, 1), 64, 1e-8), ((2, 1), 64, 1e-8),
                                             ((0.1, 1), 4, 1e-8), ((0.1, 1), 64, 2.0)])
def test_config_validation(window, grid, tol):
    with pytest.raises(ValueError):
        OptimizerConfig(window, 3, grid, tol)


def test_golden_section_on_parabola():
    x, fx = golden_max(lambda t: -(t - 0.3) ** 2, -1.0, 2.0, 1e-10)
    assert abs(x - 0.3) < 1e-9 and fx <= 0


def test_greedy_finds_perfect_instant(xy3):
    cfg = OptimizerConfig((0.1, 3.0), steps=4)
    sch = greedy_optimize(xy3, 1, cfg)
    assert len(sch) == 1 and sch.strategy == "optimized"
    assert abs(sch.intervals[0] - np.pi / np.sqrt(2)) < 1e-6
    tr = run(xy3, 1, sch)
    assert tr.complete and tr.P[-1] == 1.0


def test_greedy_first_step_beats_grid(rng):
    for _ in range(5):
        s = spectrum_of(random_chain(rng, 7))
        cfg = OptimizerConfig.default_for(s, steps=6, grid_points=64)
        sch = greedy_optimize(s, 2, cfg)
        p1 = run(s, 2, sch).p[0]
        assert all(p1 >= run(s, 2, [t]).p[0] - 1e-15 for t in cfg.grid())


def test_greedy_expected_steps_not_worse_than_best_grid_tau():
    s = spectrum_of(ChainSpec.uniform(6, "xy"))
    cfg = OptimizerConfig.default_for(s, steps=40, grid_points=128)
    greedy = run(s, 1, greedy_optimize(s, 1, cfg))
    lb_greedy, _ = expected_steps(greedy)
    best = max((run(s, 1, uniform(t, 40)) for t in cfg.grid()), key=lambda tr: tr.P[-1])
    # partial means with the unreached tail charged at step q+1
    tail = lambda tr: expected_steps(tr)[0] + (1 - tr.P[-1]) * (tr.steps + 1)  # noqa: E731
    assert greedy.P[-1] >= best.P[-1] - 1e-12
    assert tail(greedy) <= tail(best) + 1e-9
    assert lb_greedy > 0


def test_window_without_transfer_is_flagged():
    s = spectrum_of(ChainSpec.uniform(10, "xy"))
    cfg = OptimizerConfig((1e-5, 1e-3), steps=3, grid_points=16, refine_tolerance=1e-7)
    sch = greedy_optimize(s, 1, cfg)
    assert sch.flagged_steps == (1, 2, 3)
    assert run(s, 1, sch).P[-1] < 1e-12


def test_expected_steps_cases():
    assert expected_steps(trace_from_probabilities([1.0], [1.0])) == (1.0, 1.0)
    assert expected_steps(trace_from_probabilities([0.5, 1.0], [1.0, 1.0])) == (1.5, 1.5)
    lb, exact = expected_steps(trace_from_probabilities([0.9], [1.0]))
    assert exact is None and lb == 0.9
