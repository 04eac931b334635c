import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import stats

from conftest import FIG1_INNOVATION, make_spec
from testsched.model import (
    ConfigError,
    InnovationDist,
    State,
    action_upper_bound,
    expected_penalty,
    innovation_transition,
    observation_dist,
    reward,
)

BASE = make_spec(eta=0.95)
PRIOR = make_spec(eta=0.95, prior=(0.5, 0.1))


def test_observation_baseline_is_geometric():
    d = observation_dist(State(1, 1, 0), 1, BASE)
    for k in range(10):
        assert d.pmf(k) == pytest.approx(0.5 ** (k + 1), rel=1e-13)


def test_observation_innovation_shifts_rate():
    spec = make_spec(innovation=((0, 1), (0.5, 0.5)))
    assert observation_dist(State(1, 1, 1), 1, spec).pmf(0) == pytest.approx(2 / 3, rel=1e-13)


def test_observation_mean_with_prior():
    d = observation_dist(State(0, 0, 0), 2, PRIOR)
    assert d.mean == pytest.approx(1.0)
    ks = np.arange(len(d.probs()))
    assert float(np.dot(ks, d.probs())) == pytest.approx(1.0, abs=1e-9)


def test_observation_matches_scipy_without_prior():
    d = observation_dist(State(3, 7, 0), 4, BASE)
    ks = np.arange(30)
    ref = stats.nbinom.pmf(ks, 4 * 3, 7 / 8)
    assert np.allclose([d.pmf(int(k)) for k in ks], ref, rtol=1e-12, atol=0)


@settings(max_examples=200, deadline=None)
@given(K=st.integers(0, 60), N=st.integers(0, 60), b=st.integers(-3, 10), n=st.integers(1, 200))
def test_observation_mass_at_truncation(K, N, b, n):
    spec = make_spec(prior=(0.8, 0.5), innovation=((-1, 0, 1), (0.2, 0.5, 0.3)), beta_i_min=-3, beta_i_max=10)
    s = State(K, N, b)
    assume(spec.is_valid(s))
    d = observation_dist(s, n, spec)
    p = d.probs()
    assert abs(math.fsum(p) - 1.0) < 1e-9
    assert d.truncation_index == len(p) - 1


def test_observation_rejects_invalid():
    with pytest.raises(ValueError):
        observation_dist(State(0, 1, 0), 1, BASE)
    with pytest.raises(ValueError):
        observation_dist(State(1, 1, 0), BASE.n_cap + 1, BASE)


def test_reward_examples():
    assert reward(State(1, 2, 0), 1, 0, BASE) == pytest.approx(0.95)  # <1,3> terminal
    assert reward(State(5, 1, 0), 1, 2, BASE) == pytest.approx(-0.10)
    assert reward(State(1, 1, 0), 2, 0, BASE) == pytest.approx(0.95)


def test_reward_ignores_innovation_level():
    spec = make_spec(innovation=FIG1_INNOVATION)
    assert reward(State(1, 1, 5), 2, 0, spec) == reward(State(1, 1, 0), 2, 0, spec)


@settings(max_examples=100, deadline=None)
@given(K=st.integers(1, 30), N=st.integers(1, 30), n=st.integers(1, 20), k1=st.integers(0, 40), k2=st.integers(0, 40))
def test_reward_separable_off_terminal(K, N, n, k1, k2):
    s = State(K, N, 0)
    if BASE.is_terminal(K + k1, N + n) or BASE.is_terminal(K + k2, N + n):
        return
    assert reward(s, n, k1, BASE) - reward(s, n, k2, BASE) == pytest.approx(-(1 - BASE.eta) * (k1 - k2), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(K=st.integers(1, 30), N=st.integers(1, 30), n=st.integers(1, 30))
def test_terminal_successors_form_prefix(K, N, n):
    flags = [BASE.is_terminal(K + k, N + n) for k in range(60)]
    first_false = flags.index(False) if False in flags else len(flags)
    assert not any(flags[first_false:])


def test_expected_penalty_examples():
    assert expected_penalty(State(1, 3, 0), 10, BASE) == pytest.approx(0.05 * 10 / 3)
    assert expected_penalty(State(1, 3, 0), 0, BASE) == 0.0
    spec = make_spec(eta=0.95, prior=(0.5, 0.1), innovation=((0, 1), (0.5, 0.5)))
    s = State(0, 0, 2)
    val = expected_penalty(s, 4, spec)
    assert val == pytest.approx(0.05 * 4 * 2.5 / 7, rel=1e-12)
    d = observation_dist(s, 4, spec)
    ks = np.arange(len(d.probs()))
    assert val == pytest.approx(0.05 * float(np.dot(ks, d.probs())), abs=1e-8)


def test_action_upper_bound_examples():
    spec = make_spec(eta=0.95, c_ref=0.99)
    assert not spec.is_terminal(1, 3)
    assert action_upper_bound(State(1, 3, 0), spec) == 57
    assert action_upper_bound(State(10, 1, 0), make_spec(eta=0.5)) == 0
    assert action_upper_bound(State(1, 3, 0), BASE) == 0  # terminal
    assert action_upper_bound(State(1, 3, 0), make_spec(eta=0.99, c_ref=0.999, n_cap=25)) == 25  # 99*3 clipped


def test_innovation_transition_examples():
    spec = make_spec(innovation=FIG1_INNOVATION, beta_i_min=-10, beta_i_max=20)
    d = spec.innovation
    assert innovation_transition(0, 2, d, spec) == {0: 0.5, 2: 0.25, 4: 0.25}
    assert innovation_transition(3, 0, d, spec) == {3: 1.0}
    assert innovation_transition(20, 3, d, spec) == {20: 1.0}
    assert innovation_transition(18, 1, d, spec) == {18: 0.5, 19: 0.25, 20: 0.25}


def test_innovation_transition_keeps_rate_positive():
    spec = make_spec(innovation=((-2, 1), (0.5, 0.5)), beta_i_min=-10, beta_i_max=5)
    out = innovation_transition(0, 3, spec.innovation, spec, n_next=4)
    assert out == {-3: 0.5, 3: 0.5}
    assert all(4 + b > 0 for b in out)
    assert innovation_transition(-2, 3, spec.innovation, spec, n_next=4) == {-3: 0.5, 1: 0.5}


def test_innovation_dist_validation():
    assert InnovationDist().is_trivial
    assert InnovationDist((), ()).support == (0,)
    with pytest.raises(ConfigError) as e:
        InnovationDist((0, 1), (0.5, 0.6))
    assert e.value.field == "innovation.probs"
    with pytest.raises(ConfigError) as e:
        InnovationDist((1, 1), (0.5, 0.5))
    assert e.value.field == "innovation.values"
    with pytest.raises(ConfigError):
        InnovationDist((0, 1), (1.0,))


@pytest.mark.parametrize("kw,field", [
    (dict(eta=1.0), "eta"),
    (dict(eta=0.9, gamma=1.5), "gamma"),
    (dict(eta=0.9, horizon=0), "horizon"),
    (dict(eta=0.9, k_max=0), "grid.k_max"),
    (dict(eta=0.9, beta_i_min=1), "beta_i.min"),
    (dict(eta=0.9, n_cap=0), "n_cap"),
])
def test_problem_spec_validation(kw, field):
    with pytest.raises(ConfigError) as e:
        make_spec(**kw)
    assert e.value.field == field


def test_grid_bounds_depend_on_prior():
    assert (BASE.k_lo, BASE.n_lo) == (1, 1)
    assert (PRIOR.k_lo, PRIOR.n_lo) == (0, 0)
    assert (BASE.b_lo, BASE.b_hi) == (0, 0)
    spec = make_spec(innovation=FIG1_INNOVATION)
    assert (spec.b_lo, spec.b_hi) == (0, spec.beta_i_max)
    assert spec.table_shape() == (50, 50, spec.beta_i_max + 1)


def test_terminal_thresholds_cover_margin():
    kthr = BASE.terminal_thresholds
    assert len(kthr) == BASE.n_thr - BASE.n_lo + 1
    assert np.all(np.diff(kthr) >= 0)
    for N in (1, 3, 50, BASE.n_thr):
        K = int(kthr[N - BASE.n_lo])
        assert K < BASE.k_lo or BASE.is_terminal(K, N)
        assert not BASE.is_terminal(K + 1, N)
    with pytest.raises(ValueError):
        kthr[0] = 5
