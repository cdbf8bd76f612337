import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multirail import (ChainSpec, Jitter, Schedule, jitter_stream, jittered_run, monte_carlo,
                       reach, run, sample_success_steps, steps_to_reach, transfer_amplitude,
                       uniform)
from multirail.protocol import trace_from_probabilities

from conftest import random_chain, spectrum_of

T_PERFECT = np.pi / np.sqrt(2)


def test_perfect_single_step(xy3):
    for K in (1, 2, 3):
        tr = run(xy3, K, [T_PERFECT])
        assert tr.steps == 1 and tr.complete
        assert tr.p[0] == 1.0 and tr.P[0] == 1.0 and tr.w[-1] == 0.0


def test_first_step_probability(rng):
    s = spectrum_of(random_chain(rng, 7))
    for K in (1, 2, 3):
        tr = run(s, K, [1.3])
        assert abs(tr.P[0] - abs(transfer_amplitude(s, 1.3)) ** (2 * K)) < 1e-13


def test_trace_truncates_after_certain_success(xy2):
    tr = run(xy2, 1, [np.pi / 2, np.pi / 2])
    assert tr.steps == 1 and tr.certain_step == 1 and tr.P[-1] == 1.0


def test_representations_agree(rng):
    s = spectrum_of(random_chain(rng, 5))
    a = run(s, 2, uniform(0.9, 30), "dense")
    b = run(s, 2, uniform(0.9, 30), "product_sum")
    np.testing.assert_allclose(a.p, b.p, atol=1e-10)
    assert a.metadata["representation"] == "dense"


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule(())
    with pytest.raises(ValueError):
        Schedule((1.0, -1.0))
    with pytest.raises(ValueError):
        Schedule((1.0,), "random")
    sch = Schedule((1.0, 2.0), "custom", Jitter(0.1, 3))
    assert Schedule.from_dict(json.loads(json.dumps(sch.to_dict()))) == sch


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(2, 10), K=st.integers(1, 2),
       q=st.integers(1, 40))
def test_telescoping_identities(seed, N, K, q):
    rng = np.random.default_rng(seed)
    s = spectrum_of(random_chain(rng, N))
    tr = run(s, K, rng.uniform(0.2, 4.0, q), "auto")
    assert np.max(np.abs(tr.pi - (tr.w[:-1] - tr.w[1:]))) <= 1e-10
    assert np.max(np.abs(tr.P - (1 - tr.w[1:]))) <= 1e-10
    assert np.all(np.diff(tr.P) >= -1e-15)
    assert np.all((tr.p >= 0) & (tr.p <= 1))


def test_csv_layout():
    tr = trace_from_probabilities([0.5, 1.0], [1.0, 2.0], 3, 1)
    assert tr.to_csv() == ("step,t,p,pi,P,w\n"
                           "1,1.0,0.5,0.5,0.5,0.5\n"
                           "2,2.0,1.0,0.5,1.0,0.0\n")
    assert tr.certain_step == 2
    assert json.loads(tr.to_json())["P"] == [0.5, 1.0]


def test_reach_perfect_chain(xy3):
    r = steps_to_reach(xy3, 2, T_PERFECT, 0.999, 10)
    assert r.reached and r.steps == 1


def test_ring_never_reaches():
    s = spectrum_of(ChainSpec.uniform(4, "xy", periodic=True))
    r = steps_to_reach(s, 1, 1.3, 0.999, 2000)
    assert not r.reached and r.steps is None
    assert 0.3 < r.achieved < 0.6


def test_heisenberg_ten_sites_two_excitations_baseline():
    s = spectrum_of(ChainSpec.uniform(10, "heisenberg"))
    r = steps_to_reach(s, 2, 1.0, 0.99, 10_000)
    assert r.reached
    assert r.steps == 572  # regression baseline recorded from this implementation


def test_coin_flip_law():
    mc = sample_success_steps([0.5, 0.5], 100_000, seed=11)
    sigma = np.sqrt(0.25 / 100_000)
    assert abs(mc.frequencies[0] - 0.5) < 3 * sigma
    sigma2 = np.sqrt(0.25 * 0.75 / 100_000)
    assert abs(mc.frequencies[1] - 0.25) < 3 * sigma2
    assert sample_success_steps([1.0], 1000, seed=0).counts.tolist() == [1000, 0]


def test_sampling_needs_seed_and_runs():
    with pytest.raises(ValueError):
        sample_success_steps([0.5], 10, None)
    with pytest.raises(ValueError):
        sample_success_steps([0.5], 0, 1)


def test_monte_carlo_independent_of_worker_count(rng):
    p = rng.uniform(0, 0.4, 12)
    a = sample_success_steps(p, 200_000, 42, workers=1)
    b = sample_success_steps(p, 200_000, 42, workers=7)
    np.testing.assert_array_equal(a.counts, b.counts)
    assert a.to_csv() == b.to_csv()
    c = sample_success_steps(p, 200_000, 43, workers=1)
    assert not np.array_equal(a.counts, c.counts)


def test_monte_carlo_against_trace(rng):
    s = spectrum_of(random_chain(rng, 4))
    mc, tr = monte_carlo(s, 1, uniform(1.7, 10), 100_000, seed=5)
    pi = np.append(tr.pi, 1 - tr.P[-1])
    sigma = np.sqrt(pi * (1 - pi) / mc.runs)
    assert np.all(np.abs(mc.frequencies - pi) <= 3 * sigma + 1e-12)


def test_zero_jitter_is_plain_run(rng):
    s = spectrum_of(random_chain(rng, 5))
    sch = uniform(1.2, 15)
    a = run(s, 2, sch)
    b = jittered_run(s, 2, sch, Jitter(0.0, 9))
    np.testing.assert_array_equal(a.p, b.p)


def test_jitter_is_seeded(rng):
    s = spectrum_of(random_chain(rng, 5))
    sch = Schedule((1.2,) * 10, "uniform", Jitter(0.1, 9))
    a, b = run(s, 1, sch), run(s, 1, sch)
    np.testing.assert_array_equal(a.intervals, b.intervals)
    assert np.all(np.abs(a.intervals - 1.2) <= 0.1) and np.any(a.intervals != 1.2)
    with pytest.raises(ValueError):
        jittered_run(s, 1, uniform(0.1, 3), Jitter(0.2, 1))


def test_jitter_around_perfect_instant_recovers(xy3):
    jit = Jitter(0.1 * T_PERFECT, 4)
    tr = jittered_run(xy3, 1, uniform(T_PERFECT, 1), jit)
    assert tr.p[0] < 1
    r = reach(xy3, 1, jitter_stream(T_PERFECT, jit), 1 - 1e-6, 100_000)
    assert r.reached
