import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from drddpc import data
from drddpc.model import NoiseSpec


def test_hankel_small_example():
    H = data.hankel(np.array([1.0, 2.0, 3.0, 4.0]), 2)
    assert np.array_equal(H, [[1, 2, 3], [2, 3, 4]])


def test_hankel_full_depth_is_one_column():
    z = np.arange(12.0).reshape(6, 2)
    H = data.hankel(z, 6)
    assert H.shape == (12, 1) and np.array_equal(H[:, 0], z.ravel())


def test_hankel_of_constant_is_constant():
    assert np.all(data.hankel(np.full((9, 2), 3.5), 4) == 3.5)


def test_hankel_rejects_bad_depth():
    with pytest.raises(ValueError):
        data.hankel(np.zeros(3), 4)
    with pytest.raises(ValueError):
        data.hankel(np.zeros(3), 0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 3)), elements=st.floats(-1e3, 1e3)), st.data())
def test_hankel_entries_follow_definition(z, d):
    T, eta = z.shape
    L = d.draw(st.integers(1, T))
    H = data.hankel(z, L)
    assert H.shape == (eta * L, T - L + 1)
    i = d.draw(st.integers(0, L - 1))
    j = d.draw(st.integers(0, T - L))
    assert np.array_equal(H[i * eta:(i + 1) * eta, j], z[i + j])


def test_partition_dimensions_at_standard_settings(noisy_offline):
    _, part, _ = noisy_offline
    assert part.N == 186 and part.M.shape == (20, 186)
    assert part.Yf.shape == (10, 186)


def test_partition_minimum_length_gives_one_column():
    traj = data.Trajectory(u=np.random.default_rng(0).standard_normal(15), y=np.random.default_rng(1).standard_normal(15))
    with pytest.warns(data.RankDeficiencyWarning):
        part = data.partition(traj, 5, 10)
    assert part.N == 1


def test_partition_too_short_is_an_error():
    traj = data.Trajectory(u=np.zeros(5), y=np.zeros(5))
    with pytest.raises(ValueError):
        data.partition(traj, 3, 3)


def test_noise_free_regressor_rank_is_inputs_plus_state(plant):
    # exact data: y_p is a function of (x, u_p), so rank(M) = m (Tp + Tf) + n = 17
    traj = data.excite_and_collect(plant, NoiseSpec.isotropic(1, 0.0), 200, seed=5)
    with pytest.warns(data.RankDeficiencyWarning):
        part = data.partition(traj, 5, 10)
    assert part.rank_deficient
    assert np.linalg.matrix_rank(part.M) == 17


def test_noisy_regressor_has_full_row_rank(noisy_offline):
    _, part, _ = noisy_offline
    assert not part.rank_deficient and np.linalg.matrix_rank(part.M) == 20


def test_partition_blocks_match_trajectory(noisy_offline):
    traj, part, _ = noisy_offline
    i = 17
    assert np.array_equal(part.Up[:, i], traj.u[i:i + 5].ravel())
    assert np.array_equal(part.Yf[:, i], traj.y[i + 5:i + 15].ravel())
    assert np.array_equal(part.column_window(i), part.M[:, i])


def test_zero_input_std_gives_zero_input(plant):
    traj = data.excite_and_collect(plant, NoiseSpec.isotropic(1, 0.012), 50, input_std=0.0, seed=2)
    assert not traj.u.any()


def test_collection_is_deterministic(plant):
    noise = NoiseSpec.isotropic(1, 0.012)
    a = data.excite_and_collect(plant, noise, 200, seed=8)
    b = data.excite_and_collect(plant, noise, 200, seed=8)
    assert np.array_equal(a.u, b.u) and np.array_equal(a.y, b.y)


def test_csv_round_trip_is_exact(tmp_path, noisy_offline):
    traj, _, _ = noisy_offline
    path = tmp_path / "t.csv"
    data.write_csv(traj, path)
    back = data.read_csv(path)
    assert np.array_equal(back.u, traj.u) and np.array_equal(back.y, traj.y)


def test_csv_empty_file_is_an_error(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(ValueError, match="empty"):
        data.read_csv(path)


def test_csv_short_file(tmp_path):
    rng = np.random.default_rng(3)
    traj = data.Trajectory(u=rng.standard_normal(15), y=rng.standard_normal(15))
    path = tmp_path / "short.csv"
    data.write_csv(traj, path)
    assert data.read_csv(path).T == 15


def test_csv_ragged_row_is_an_error(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("k,u_1,y_1\n0,1.0,2.0\n1,3.0\n")
    with pytest.raises(ValueError, match="fields"):
        data.read_csv(path)
