import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from geolowrank.pointset import (PointSet, SubsetSelection, SyntheticSpec, delta, distance,
                                 gaussian_mixture, generate_synthetic, load_csv, min_distances,
                                 standardize, subsample_without_replacement)

coords = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def brute_delta(Z, S):
    return max(min(np.sqrt(((z - s) ** 2).sum()) for s in S) for z in Z)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 25), st.just(3)), elements=coords),
       st.data())
def test_delta_matches_double_loop(Z, data):
    k = data.draw(st.integers(1, Z.shape[0]))
    idx = data.draw(st.lists(st.integers(0, Z.shape[0] - 1), min_size=k, max_size=k, unique=True))
    assert delta(Z, Z[idx]) == pytest.approx(brute_delta(Z, Z[idx]), abs=1e-12)


def test_delta_of_subset_of_itself_is_zero(rng):
    P = rng.random((40, 2))
    assert delta(P, P) == 0.0
    assert delta(P[:5], P) == 0.0


def test_delta_shrinks_when_subset_grows(rng):
    P = rng.random((200, 3))
    values = [delta(P, P[:k]) for k in (1, 5, 20, 80, 200)]
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_min_distances_rejects_empty_and_mismatched(rng):
    with pytest.raises(ValueError):
        min_distances(rng.random((3, 2)), np.empty((0, 2)))
    with pytest.raises(ValueError):
        min_distances(rng.random((3, 2)), rng.random((3, 3)))


def test_distance():
    assert distance([0, 0], [3, 4]) == 5.0
    with pytest.raises(ValueError):
        distance([0, 0], [1, 2, 3])


def test_pointset_is_immutable_copy():
    raw = np.zeros((3, 2))
    ps = PointSet(raw)
    raw[0, 0] = 7.0
    assert ps.points[0, 0] == 0.0
    with pytest.raises(ValueError):
        ps.points[0, 0] = 1.0
    assert PointSet(np.arange(4.0)).dim == 1


def test_subset_selection_validates():
    ps = PointSet(np.zeros((4, 2)))
    with pytest.raises(IndexError):
        SubsetSelection(ps, [0, 4])
    with pytest.raises(ValueError):
        SubsetSelection(ps, [1, 1])
    s = SubsetSelection(ps, [3, 1, 2])
    assert s.prefix(2).indices.tolist() == [3, 1]


def test_standardize_moments_and_constant_dims(rng):
    X = rng.normal(5.0, 3.0, size=(500, 3))
    Z, rec = standardize(X)
    assert np.allclose(Z.points.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(Z.points.std(axis=0), 1.0)
    assert np.allclose(rec.invert(Z.points), X)
    X[:, 1] = 2.0
    with pytest.warns(RuntimeWarning):
        Z, rec = standardize(X)
    assert rec.constant_dims == (1,)
    assert np.all(Z.points[:, 1] == 0.0)


def test_subsample_without_replacement_is_seeded(rng):
    ps = PointSet(rng.random((50, 2)))
    a = subsample_without_replacement(ps, 20, seed=3)
    b = subsample_without_replacement(ps, 20, seed=3)
    assert np.array_equal(a.points, b.points)
    assert len({tuple(p) for p in a.points}) == 20
    with pytest.raises(ValueError):
        subsample_without_replacement(ps, 51, seed=0)


def test_load_csv_header_and_errors(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("a,b\n1,2\n3,4\n\n")
    ps = load_csv(p)
    assert ps.points.tolist() == [[1, 2], [3, 4]]
    p.write_text("1,2\nx,4\n")
    with pytest.raises(ValueError, match="non-numeric"):
        load_csv(p)
    p.write_text("1,2\n3\n")
    with pytest.raises(ValueError, match="lengths"):
        load_csv(p)


@pytest.mark.parametrize("shift,expected", [(2.7, 1.0567), (2.0, 0.3789), (0.5, 0.1220)])
def test_shifted_manifold_separation(shift, expected):
    from scipy.spatial.distance import cdist
    X, Y = generate_synthetic(SyntheticSpec("shifted-manifold", n=1400, shift=shift, seed=0))
    assert len(X) == len(Y) == 1400
    assert np.allclose(Y.points - X.points, [0.0, 0.0, shift])
    assert cdist(X.points, Y.points).min() == pytest.approx(expected, abs=1e-3)


def test_synthetic_kinds_are_seeded():
    for kind in ("uniform-boxes", "two-clusters-2d", "cored-clusters"):
        a = generate_synthetic(SyntheticSpec(kind, n=60, m=40, d=2, seed=4))
        b = generate_synthetic(SyntheticSpec(kind, n=60, m=40, d=2, seed=4))
        assert len(a[0]) == 40 and len(a[1]) == 60
        assert np.array_equal(a[0].points, b[0].points) and np.array_equal(a[1].points, b[1].points)
    with pytest.raises(ValueError):
        generate_synthetic(SyntheticSpec("nope"))


def test_uniform_boxes_side():
    X, Y = generate_synthetic(SyntheticSpec("uniform-boxes", n=100, d=2, extra={"side": 0.3}))
    assert X.points.min() >= 0 and X.points.max() <= 0.3
    assert Y.points.min() >= 0.6 and Y.points.max() <= 0.9


def test_gaussian_mixture_intrinsic_dimension():
    Z = gaussian_mixture(400, 40, 5, seed=1, intrinsic_dim=3, ambient_noise=1e-6)
    sv = np.linalg.svd(Z - Z.mean(axis=0), compute_uv=False)
    assert sv[3] / sv[0] < 1e-5 < sv[2] / sv[0]
    with pytest.raises(ValueError):
        gaussian_mixture(10, 4, 2, seed=0, intrinsic_dim=5)
