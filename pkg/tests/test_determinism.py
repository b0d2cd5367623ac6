import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chaoskit import determinism as det
from chaoskit.determinism import BoxStats, DeterminismError
from chaoskit.embedding import EmbeddingParams, embed, estimate_lag

PROPERTY = settings(max_examples=100, deadline=None, derandomize=True)


def unit_vectors(rng, shape, m):
    v = rng.standard_normal(shape + (m,))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def test_sine_is_deterministic(sine):
    e = embed(sine, EmbeddingParams(2, estimate_lag(sine).tau))
    res, _ = det.determinism(e)
    assert res.kappa >= 0.99


def test_random_unit_field_scores_near_zero():
    rng = np.random.default_rng(11)
    v = unit_vectors(rng, (200, 100), 2)
    field_ = {(b,): BoxStats(100, v[b].mean(axis=0)) for b in range(200)}
    res = det.kappa(field_)
    assert -0.05 <= res.kappa_raw <= 0.05
    assert 0.0 <= res.kappa <= 1.0
    assert res.boxes_used == 200 and res.passes_used == 20_000


@pytest.mark.parametrize("n, m", [(5, 2), (20, 5), (100, 10)])
def test_random_walk_baseline_monte_carlo(n, m):
    rng = np.random.default_rng(n * 1000 + m)
    trials, chunk = 100_000, 10_000
    sq = np.concatenate([np.sum(unit_vectors(rng, (chunk, n), m).mean(axis=1) ** 2, axis=1)
                         for _ in range(trials // chunk)])
    se = sq.std(ddof=1) / np.sqrt(trials)
    assert abs(sq.mean() - det.random_walk_baseline(n)) <= 3 * se


def test_passes_use_the_first_point_after_the_run():
    x = np.array([[0.1, 0.1], [0.2, 0.2], [0.9, 0.1], [0.9, 0.9], [0.1, 0.9]])
    _, ids = det.coarse_grain(x, 2)
    passes = det.collect_passes(x, ids)
    assert [(p.box, p.entry, p.exit) for p in passes] == [((0, 0), 0, 2), ((1, 0), 2, 3), ((1, 1), 3, 4)]
    np.testing.assert_allclose(passes[0].vector, [1.0, 0.0])


def test_coarse_grain_edges():
    _, ids = det.coarse_grain(np.array([[0.0], [0.5], [1.0]]), 4)
    assert ids.ravel().tolist() == [0, 2, 3]
    with pytest.raises(DeterminismError):
        det.coarse_grain(np.ones((5, 2)), 4)
    with pytest.raises(DeterminismError):
        det.coarse_grain(np.zeros((0, 2)), 4)


def test_sparse_grid_in_high_dimension(henon):
    res, field_ = det.determinism(embed(henon, EmbeddingParams(10, 1)))
    assert res.boxes_occupied == len(field_) and 0.0 <= res.kappa <= 1.0


def test_n_min_below_two_rejected():
    with pytest.raises(DeterminismError):
        det.kappa({(0,): BoxStats(3, np.array([1.0, 0.0]))}, n_min=1)


def test_no_qualifying_box():
    with pytest.raises(DeterminismError, match="no box"):
        det.kappa({(0,): BoxStats(1, np.array([1.0, 0.0]))})


def test_projection_2d(henon):
    e = embed(henon[:3000], EmbeddingParams(4, 1))
    res, _ = det.determinism(e, projection_2d=True)
    assert res.projection == "2d" and res.m == 2
    with pytest.raises(DeterminismError):
        det.determinism(embed(henon[:100], EmbeddingParams(1, 1)), projection_2d=True)


def test_write_boxes(tmp_path, henon):
    res, field_ = det.determinism(embed(henon[:2000], EmbeddingParams(2, 1)))
    path = tmp_path / "boxes.csv"
    res.write_boxes(path, field_)
    lines = path.read_text().splitlines()
    assert lines[0] == "box,n_k,norm_v,d_k" and len(lines) == len(field_) + 1


trajectories = st.tuples(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(20, 400))


def _trajectory(seed, m, n):
    rng = np.random.default_rng(seed)
    # a noisy rotation gives a mix of coherent and incoherent boxes
    t = np.arange(n) * 0.3
    base = np.stack([np.cos(t + k) for k in range(m)], axis=1)
    return np.round((base + 0.3 * rng.standard_normal((n, m))) * 256) / 256


@PROPERTY
@given(trajectories, st.integers(2, 30))
def test_kappa_in_unit_interval(params, bins):
    x = _trajectory(*params)
    try:
        res, _ = det.determinism(x, bins)
    except DeterminismError:
        return
    assert 0.0 <= res.kappa <= 1.0


@PROPERTY
@given(trajectories, st.integers(-64, 64), st.randoms(use_true_random=False))
def test_rigid_motion_invariance(params, shift, rnd):
    x = _trajectory(*params)
    perm = list(range(x.shape[1]))
    rnd.shuffle(perm)
    moved = x[:, perm] + shift  # dyadic values: the shift is exact
    try:
        a, _ = det.determinism(x)
    except DeterminismError:
        with pytest.raises(DeterminismError):
            det.determinism(moved)
        return
    b, _ = det.determinism(moved)
    assert (a.passes_total, a.passes_used, a.boxes_used) == (b.passes_total, b.passes_used, b.boxes_used)
    assert abs(a.kappa - b.kappa) <= 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_reversal_of_palindrome(seed):
    half = _trajectory(seed, 2, 300)
    x = np.concatenate([half, half[::-1][1:]])
    a, fa = det.determinism(x, 10)
    b, fb = det.determinism(x[::-1], 10)
    assert a.kappa == b.kappa
    assert {k: v.norm for k, v in fa.items()} == {k: v.norm for k, v in fb.items()}


def test_corner_points_land_in_extreme_boxes():
    _, ids = det.coarse_grain(np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.3, 0.7, 0.5]]), 25)
    assert ids[0].tolist() == [0, 0, 0] and ids[1].tolist() == [24, 24, 24]


def test_two_bins_split_at_half():
    x = np.linspace(0.0, 1.0, 11)
    _, ids = det.coarse_grain(x, 2)
    assert ids.ravel().tolist() == [0] * 5 + [1] * 6


def test_henon_support_is_fractal(henon):
    _, ids = det.coarse_grain(embed(henon, EmbeddingParams(2, 1)), 25)
    occupied = len({tuple(row) for row in ids.tolist()})
    assert 50 < occupied < 625


def test_pass_through_a_then_b():
    x = np.array([[0.1, 0.1], [0.2, 0.3], [0.9, 0.9]])
    _, ids = det.coarse_grain(x, 2)
    passes = det.collect_passes(x, ids)
    assert len(passes) == 1
    np.testing.assert_allclose(passes[0].vector, (x[2] - x[0]) / np.linalg.norm(x[2] - x[0]))


def test_trajectory_inside_one_box_has_no_pass():
    x = np.array([[0.0, 0.0], [0.01, 0.02], [0.02, 0.01], [1.0, 1.0]])
    _, ids = det.coarse_grain(x, 2)
    assert det.collect_passes(x[:3], ids[:3]) == []


def test_straight_line_through_ten_boxes():
    x = np.linspace(0.0, 1.0, 200)[:, None] * np.array([[1.0, 1.0]])
    _, ids = det.coarse_grain(x, 10)
    passes = det.collect_passes(x, ids)
    assert len(passes) == 9
    assert all(np.allclose(p.vector, passes[0].vector) for p in passes)


def _box(*vectors):
    v = np.array(vectors, dtype=float)
    return {(0,): BoxStats(len(v), v.mean(axis=0))}


@pytest.mark.parametrize("vectors, norm", [
    (([1, 0], [-1, 0]), 0.0),
    (([1, 0], [1, 0], [1, 0]), 1.0),
    (([1, 0], [0, 1]), np.sqrt(2) / 2),
])
def test_mean_vector_norm(vectors, norm):
    assert _box(*vectors)[(0,)].norm == pytest.approx(norm)


def test_aligned_boxes_give_kappa_one():
    field_ = {**_box([1, 0], [1, 0]), (1,): BoxStats(4, np.array([0.0, 1.0]))}
    assert det.kappa(field_).kappa == 1.0


def test_quarter_period_sine():
    z = np.sin(2 * np.pi * np.arange(10_000) / 100)
    assert det.determinism(embed(z, EmbeddingParams(2, 25)))[0].kappa >= 0.99
