import numpy as np
import pytest

from dltm.dlm import (
    StateSpaceSpec,
    backward_sample,
    forecast_state,
    forward_filter,
    simulate_states,
    smooth,
    system_matrix,
    trend_spec,
)
from dltm.rng import keyed_generator
from oracles import condition, dlm_joint


def test_hand_worked_single_step():
    spec = trend_spec("random_walk", delta2=0.5, a2=1.0, m0=0.0, C0=0.5)
    fm = forward_filter(spec, [[1.0]])
    assert fm.R[0, 0, 0] == pytest.approx(1.0)
    assert fm.Q[0][0, 0] == pytest.approx(2.0)
    assert fm.A[0][0, 0] == pytest.approx(0.5)
    assert fm.m[0, 0] == pytest.approx(0.5)
    assert fm.C[0, 0, 0] == pytest.approx(0.5)


def test_empty_slice_is_pure_prediction():
    spec = trend_spec("linear", 0.2, 0.5, m0=[1.0, 0.5], C0=0.3)
    fm = forward_filter(spec, [[0.3, 0.1], [], [2.0]])
    assert np.allclose(fm.m[1], fm.a[1])
    assert np.allclose(fm.C[1], fm.R[1])
    assert fm.A[1].shape == (2, 0)


@pytest.mark.parametrize(
    "kind,G",
    [
        ("random_walk", [[1.0]]),
        ("linear", [[1, 1], [0, 1]]),
        ("quadratic", [[1, 1, 1], [0, 1, 1], [0, 0, 1]]),
        ("harmonic", [[0, 1], [-1, 0]]),
    ],
)
def test_system_matrices(kind, G):
    assert np.allclose(system_matrix(kind), G, atol=1e-15)
    spec = trend_spec(kind, 0.1, 0.2)
    assert spec.F_row[0] == 1 and spec.F_row[1:].sum() == 0


def test_harmonic_period():
    G = system_matrix("harmonic", 2 * np.pi / 5)
    assert np.allclose(np.linalg.matrix_power(G, 5), np.eye(2))


def test_bad_specs():
    with pytest.raises(ValueError):
        system_matrix("cubic")
    with pytest.raises(ValueError):
        trend_spec("linear", 0.0, 1.0)
    with pytest.raises(ValueError):
        StateSpaceSpec([1.0], [[1.0]], [[-1.0]], 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        StateSpaceSpec([1.0, 0.0], np.eye(2), [[1, 2], [0, 1]], 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        trend_spec("linear", 0.1, 0.1, discount=1.5)


def test_forecast_state_examples():
    spec = trend_spec("linear", 0.1, 1.0)
    (m1, C1), (m2, C2) = forecast_state(spec, [1.0, 2.0], np.zeros((2, 2)), 2)
    assert m1.tolist() == [3.0, 2.0]
    assert m2.tolist() == [5.0, 2.0]
    assert np.allclose(C1, 0.1 * np.eye(2))
    assert np.allclose(C2, [[0.3, 0.1], [0.1, 0.2]])
    rw = trend_spec("random_walk", 0.25, 1.0)
    [(m, C)] = forecast_state(rw, [0.7], [[0.5]], 1)
    assert m[0] == 0.7 and C[0, 0] == pytest.approx(0.75)
    with pytest.raises(ValueError):
        forecast_state(rw, [0.0], [[1.0]], 0)


def _instance(kind, D, seed):
    rng = np.random.default_rng(seed)
    p = {"random_walk": 1, "linear": 2, "harmonic": 2, "quadratic": 3}[kind]
    spec = trend_spec(kind, 0.4, 0.3, m0=rng.normal(size=p), C0=0.8, omega=0.9)
    mu, Sigma, ia, ie = dlm_joint(spec, D)
    x = rng.multivariate_normal(mu, Sigma)
    return spec, [x[i] for i in ie], mu, Sigma, ia, ie, x


@pytest.mark.parametrize("kind", ["random_walk", "linear", "harmonic", "quadratic"])
@pytest.mark.parametrize("D", [[1], [2, 0, 3], [0, 0], [3, 1, 2, 1]])
def test_filter_and_smoother_match_dense_conditioning(kind, D):
    spec, obs, mu, Sigma, ia, ie, x = _instance(kind, D, len(D) + len(kind))
    fm = forward_filter(spec, obs)
    for t in range(len(D)):
        given = np.concatenate(ie[: t + 1]).astype(int)
        m, C = condition(mu, Sigma, ia[t], given, x[given])
        assert np.allclose(fm.m[t], m, atol=1e-9)
        assert np.allclose(fm.C[t], C, atol=1e-9)
    ms, Cs = smooth(fm, spec)
    given = np.concatenate(ie).astype(int)
    for t in range(len(D)):
        m, C = condition(mu, Sigma, ia[t], given, x[given])
        assert np.allclose(ms[t], m, atol=1e-9)
        assert np.allclose(Cs[t], C, atol=1e-9)


def test_kalman_form_matches_push_through_form():
    spec, obs, *_ = _instance("linear", [3, 2], 0)
    fm = forward_filter(spec, obs)
    for t in range(2):
        F = spec.design(len(obs[t]))
        m = fm.a[t] + fm.A[t] @ fm.e[t]
        C = fm.R[t] - fm.A[t] @ fm.Q[t] @ fm.A[t].T
        assert np.allclose(fm.m[t], m) and np.allclose(fm.C[t], C)
        assert np.allclose(fm.f[t], F @ fm.a[t])


def test_filter_is_invariant_to_observation_order():
    spec, obs, *_ = _instance("harmonic", [4, 3], 3)
    a = forward_filter(spec, obs)
    b = forward_filter(spec, [o[::-1] for o in obs])
    assert np.allclose(a.m, b.m) and np.allclose(a.C, b.C)


def test_covariances_stay_psd():
    spec, obs, *_ = _instance("quadratic", [5, 0, 1, 6], 4)
    fm = forward_filter(spec, obs, keep_obs_cov=False)
    assert fm.Q == [] and fm.A == []
    for C in list(fm.C) + list(fm.R):
        assert np.allclose(C, C.T)
        assert np.linalg.eigvalsh(C).min() > -1e-12


def test_backward_sample_shape_and_determinism():
    spec, obs, *_ = _instance("linear", [2, 2, 2], 5)
    fm = forward_filter(spec, obs)
    a = backward_sample(fm, spec, keyed_generator(1))
    b = backward_sample(fm, spec, keyed_generator(1))
    assert a.shape == (3, 2) and np.array_equal(a, b)


def test_degenerate_state_noise():
    # zero innovation and prior variance: every draw equals m0 propagated through G
    spec = StateSpaceSpec([1.0, 0.0], system_matrix("linear"), np.zeros((2, 2)), [1.0, 0.5], 0.0, 0.2)
    fm = forward_filter(spec, [[3.0], [1.0]])
    draw = backward_sample(fm, spec, keyed_generator(0))
    assert np.allclose(draw, [[1.5, 0.5], [2.0, 0.5]], atol=1e-6)


def test_discount_mode():
    spec = trend_spec("random_walk", 0.1, 1.0, C0=0.5, discount=0.5)
    fm = forward_filter(spec, [[]])
    assert fm.R[0, 0, 0] == pytest.approx(1.0)
    [(_, C)] = forecast_state(spec, [0.0], [[0.2]], 1)
    assert C[0, 0] == pytest.approx(0.4)


def test_simulate_states_moments():
    spec = trend_spec("random_walk", 0.5, 1.0, m0=1.0, C0=0.25)
    gen = keyed_generator(6)
    paths = np.array([simulate_states(spec, 3, gen) for _ in range(20000)])[..., 0]
    assert np.allclose(paths.mean(0), 1.0, atol=0.03)
    assert np.allclose(paths.var(0), [0.75, 1.25, 1.75], rtol=0.05)
