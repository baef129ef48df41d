import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drddpc import model as pm
from drddpc.model import NoiseSpec, StateSpaceModel

from conftest import random_stable_model


def test_step_zero_is_fixed_point(plant):
    x, y = pm.step(plant, np.zeros(2), np.zeros(1), np.zeros(1))
    assert np.array_equal(x, np.zeros(2)) and np.array_equal(y, np.zeros(1))


def test_step_output_reads_second_state(plant):
    _, y = pm.step(plant, np.array([0.0, 1.0]), np.zeros(1), np.zeros(1))
    assert y == pytest.approx([1.4142], abs=1e-15)


def test_step_unit_input_moves_state_by_b(plant):
    x, _ = pm.step(plant, np.zeros(2), np.ones(1), np.zeros(1))
    assert np.allclose(x, [0.0609, 0.0064], atol=1e-15)


def test_step_innovation_enters_state_and_output(plant):
    x, y = pm.step(plant, np.zeros(2), np.zeros(1), np.array([2.0]))
    assert np.allclose(x, [-1.0, 1.0]) and np.allclose(y, [2.0])


def test_step_rejects_wrong_dimensions(plant):
    with pytest.raises(ValueError, match="dimension"):
        pm.step(plant, np.zeros(3), np.zeros(1), np.zeros(1))


def test_unobservable_pair_rejected():
    with pytest.raises(ValueError, match="observable"):
        StateSpaceModel(A=np.eye(2), B=np.ones((2, 1)), C=np.array([[1.0, 0.0]]))


def test_inconsistent_shapes_rejected():
    with pytest.raises(ValueError):
        StateSpaceModel(A=np.eye(2), B=np.ones((3, 1)), C=np.eye(2))


def test_noise_covariance_must_be_psd():
    with pytest.raises(ValueError, match="semidefinite"):
        NoiseSpec(mean=np.zeros(2), covariance=np.diag([1.0, -1.0]))
    with pytest.raises(ValueError, match="symmetric"):
        NoiseSpec(mean=np.zeros(2), covariance=np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_simulate_single_step_matches_step(plant):
    x0, u, e = np.array([0.3, -0.2]), np.array([[0.7]]), np.array([[0.1]])
    res = pm.simulate(plant, x0, u, e)
    x1, y0 = pm.step(plant, x0, u[0], e[0])
    assert np.array_equal(res.trajectory.y[0], y0)
    assert np.array_equal(res.states[1], x1)


def test_simulate_zero_everything_gives_zero(plant):
    res = pm.simulate(plant, np.zeros(2), np.zeros((30, 1)), np.zeros((30, 1)))
    assert not res.trajectory.y.any()


def test_realization_is_bit_reproducible():
    noise = NoiseSpec.isotropic(2, 0.3, mean=0.1)
    a = pm.realize_noise(noise, 3, 40, seed=9)
    b = pm.realize_noise(noise, 3, 40, seed=9)
    assert np.array_equal(a.e, b.e) and np.array_equal(a.x0, b.x0)
    c = pm.realize_noise(noise, 3, 40, seed=10)
    assert not np.array_equal(a.e, c.e)


def test_innovation_draws_are_prefix_stable():
    noise = NoiseSpec.isotropic(1, 1.0)
    assert np.array_equal(pm.sample_innovations(noise, 10, 4), pm.sample_innovations(noise, 50, 4)[:10])


def test_innovation_moments_match_law():
    cov = np.array([[0.5, 0.2], [0.2, 0.3]])
    noise = NoiseSpec(mean=np.array([0.05, -0.1]), covariance=cov)
    e = pm.sample_innovations(noise, 200_000, seed=1)
    assert np.allclose(e.mean(axis=0), noise.mean, atol=5e-3)
    assert np.allclose(np.cov(e.T), cov, atol=5e-3)


def test_output_snr_near_ten_db(plant):
    # median over seeds: single trajectories scatter by a few dB
    from drddpc.data import excite_and_collect

    noise = NoiseSpec.isotropic(1, 0.012)
    snrs = []
    for seed in range(41):
        traj = excite_and_collect(plant, noise, 200, seed=seed)
        e = pm.sample_innovations(noise, 200, seed, stream=pm.STREAM_OFFLINE_NOISE)
        snrs.append(pm.output_snr_db(traj.y, e))
    assert abs(np.median(snrs) - 10.0) <= 3.0


def test_true_predictor_of_memoryless_zero_system_is_zero():
    mdl = StateSpaceModel(A=np.zeros((1, 1)), B=np.zeros((1, 1)), C=np.eye(1))
    assert np.abs(pm.true_predictor(mdl, 2, 3)).max() == 0.0


def test_true_predictor_feedthrough_block_is_identity():
    # y = x + u with x reset to zero each step: y_f = u_f
    mdl = StateSpaceModel(A=np.zeros((1, 1)), B=np.zeros((1, 1)), C=np.eye(1), D=np.eye(1))
    K = pm.true_predictor(mdl, 2, 3)
    assert np.allclose(K[:, -3:], np.eye(3), atol=1e-14)
    assert np.allclose(K[:, :-3], 0.0, atol=1e-14)


def _noise_free_windows(mdl, Tp, Tf, count, rng):
    L = Tp + Tf
    for _ in range(count):
        u = rng.standard_normal((L, mdl.m))
        res = pm.simulate(mdl, rng.standard_normal(mdl.n), u, np.zeros((L, mdl.p)))
        y = res.trajectory.y
        yield np.concatenate([u[:Tp].ravel(), y[:Tp].ravel(), u[Tp:].ravel()]), y[Tp:].ravel()


def test_true_predictor_reproduces_noise_free_simulation(plant):
    K = pm.true_predictor(plant, 5, 10)
    rng = np.random.default_rng(0)
    err = max(np.abs(yf - K @ mf).max() for mf, yf in _noise_free_windows(plant, 5, 10, 100, rng))
    assert err <= 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 2), st.integers(1, 2))
def test_true_predictor_exact_for_random_plants(seed, n, m, p):
    rng = np.random.default_rng(seed)
    mdl = random_stable_model(rng, n, m, p)
    Tp, Tf = n + 1, 4
    K = pm.true_predictor(mdl, Tp, Tf)
    for mf, yf in _noise_free_windows(mdl, Tp, Tf, 5, rng):
        assert np.allclose(K @ mf, yf, atol=1e-9 * (1 + np.abs(yf).max()))


def test_true_predictor_needs_long_enough_past(plant):
    with pytest.raises(ValueError):
        pm.true_predictor(plant, 1, 3)


def test_model_json_round_trip(tmp_path, plant):
    noise = NoiseSpec.isotropic(1, 0.012, mean=0.05)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(pm.model_to_dict(plant, noise, seed=4)))
    doc = pm.load_model_json(path)
    assert np.array_equal(doc.model.A, plant.A) and np.array_equal(doc.model.Ke, plant.Ke)
    assert np.array_equal(doc.noise.mean, noise.mean) and doc.seed == 4


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_simulation_is_linear_in_state_and_input(seed):
    rng = np.random.default_rng(seed)
    mdl = pm.benchmark_model()
    x0, u1, u2 = rng.standard_normal(2), rng.standard_normal((20, 1)), rng.standard_normal((20, 1))
    zero = np.zeros((20, 1))
    y = lambda x, u: pm.simulate(mdl, x, u, zero).trajectory.y  # noqa: E731
    assert np.allclose(y(x0, u1 + u2), y(x0, u1) + y(np.zeros(2), u2), atol=1e-10)
