import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geolowrank.bounds import (BOUND_NAMES, BoundReport, NonFiniteLipschitzError, bilinear_perturbation,
                               check_all, delta_monotonicity_probe, discrete_lipschitz, entrywise_bound,
                               geometric_bound, max_norm_bound, one_sided_bound, projection_bounds)
from geolowrank.kernels import DeskScaleError, KernelMatrixHandle, KernelSpec

norm = np.linalg.norm


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(1e-6, 10))
def test_bilinear_perturbation_holds(m, n, seed, scale):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    a, b = rng.standard_normal(m), rng.standard_normal(n)
    lhs, rhs = bilinear_perturbation(A, a, a + scale * rng.standard_normal(m), b,
                                     b + scale * rng.standard_normal(n))
    assert lhs <= rhs * (1 + 1e-12) + 1e-12


def test_bilinear_perturbation_shape_check():
    with pytest.raises(ValueError):
        bilinear_perturbation(np.eye(2), [1, 2], [1, 2], [1, 2, 3], [1, 2, 3])


def brute_lipschitz(k, Z1, Z2, S1, S2):
    best = 0.0
    for x, y, u, v in itertools.product(Z1, Z2, S1, S2):
        num = abs(k.entry(x, y) - k.entry(u, v))
        den = math.sqrt(norm(x - u) ** 2 + norm(y - v) ** 2)
        if den > 0:
            best = max(best, num / den)
    return best


def test_discrete_lipschitz_joint_matches_loops(rng):
    k = KernelSpec("gaussian", {"sigma": 0.6})
    Z1, Z2 = rng.random((5, 2)), rng.random((4, 2)) + 0.5
    S1, S2 = Z1[:2], Z2[[1, 3]]
    assert discrete_lipschitz(k, Z1=Z1, Z2=Z2, S1=S1, S2=S2) == pytest.approx(
        brute_lipschitz(k, Z1, Z2, S1, S2), rel=1e-12)


def test_discrete_lipschitz_one_variable(rng):
    k = KernelSpec("log-distance")
    W, Z, S = rng.random((3, 2)), rng.random((6, 2)) + 2, None
    S = Z[:2]
    ref2 = max(abs(k.entry(x, y) - k.entry(x, v)) / norm(y - v)
               for x in W for y in Z for v in S if norm(y - v) > 0)
    assert discrete_lipschitz(k, "second", W=W, Z2=Z, S2=S) == pytest.approx(ref2, rel=1e-12)
    # "first" is "second" with the roles of the arguments exchanged
    ref1 = max(abs(k.entry(y, x) - k.entry(u, x)) / norm(y - u)
               for x in W for y in Z for u in S if norm(y - u) > 0)
    assert discrete_lipschitz(k, "first", W=W, Z1=Z, S1=S) == pytest.approx(ref1, rel=1e-12)
    with pytest.raises(ValueError):
        discrete_lipschitz(k, "diagonal")


def test_discrete_lipschitz_infinite_on_inconsistent_values():
    # a "kernel" that is not a function of the points: duplicates disagree
    calls = iter(range(100))

    def noisy(A, B):
        return np.full((len(A), len(B)), float(next(calls)))

    Z = np.zeros((2, 1))
    assert discrete_lipschitz(noisy, Z1=Z, Z2=Z, S1=Z, S2=Z) == math.inf


def instance(rng, kernel="gaussian", m=14, n=12):
    X, Y = rng.random((m, 2)), rng.random((n, 2)) + [1.0, 0]
    k = KernelSpec("gaussian", {"sigma": 0.7}) if kernel == "gaussian" else KernelSpec("log-distance")
    return KernelMatrixHandle(k, X, Y)


def test_max_norm_estimate_matches_brute_force(rng):
    h = instance(rng)
    i1, i2 = [0, 5, 9], [2, 7]
    K = h.dense()
    Kss = K[np.ix_(i1, i2)]
    p = 1 / np.linalg.svd(Kss, compute_uv=False).min()
    B = np.zeros_like(K)
    for x, y in np.ndindex(*K.shape):
        B[x, y] = min(abs(K[x, y] - K[u, v]) + norm(K[x, i2] - K[u, i2]) + norm(K[i1, y] - K[i1, v])
                      + p * norm(K[x, i2] - K[u, i2]) * norm(K[i1, y] - K[i1, v])
                      for u in i1 for v in i2)
    rep = max_norm_bound(h, i1, i2)
    assert rep.rhs == pytest.approx(B.max(), rel=1e-10)
    ref = np.abs(K - K[:, i2] @ np.linalg.pinv(Kss) @ K[i1]).max()
    assert rep.lhs == pytest.approx(ref, rel=1e-8)
    assert rep.holds
    ent = entrywise_bound(h, i1, i2)
    assert ent.terms["all_entries_hold"] and ent.holds


def test_one_sided_estimate_matches_brute_force(rng):
    h = instance(rng, "log-distance")
    S = [1, 4, 8]
    K = h.dense()
    rep = one_sided_bound(h, S)
    assert rep.preconditions

    def T(rows):
        return max(min(abs(K[x, y] - K[x, v]) + norm(K[:, y] - K[:, v]) for v in S)
                   for x in rows for y in range(K.shape[1]))

    skel = list(range(K.shape[0]))
    assert rep.terms["first_term"] == pytest.approx(T(skel), rel=1e-12)
    r = rep.terms["r"]
    assert rep.rhs == pytest.approx(rep.terms["first_term"] + 2 * r * rep.terms["skeleton_term"])
    assert rep.holds


def test_projection_estimates(rng):
    h = instance(rng)
    col, row = projection_bounds(h, [0, 3], [1, 2, 6])
    assert col.name == "column-projection" and row.name == "row-projection"
    assert col.holds and row.holds
    K = h.dense()
    Q, _ = np.linalg.qr(K[:, [1, 2, 6]])
    assert col.lhs == pytest.approx(np.abs(K - Q @ (Q.T @ K)).max(), rel=1e-8, abs=1e-15)


@pytest.mark.parametrize("kernel", ["gaussian", "log-distance"])
@pytest.mark.parametrize("seed", range(4))
def test_check_all_holds(kernel, seed):
    rng = np.random.default_rng(seed)
    h = instance(rng, kernel, m=20, n=18)
    reports = check_all(h, rng.choice(20, 4, replace=False), rng.choice(18, 3, replace=False))
    assert [r.name for r in reports] == list(BOUND_NAMES)
    for rep in reports:
        assert rep.preconditions and rep.holds, rep.to_dict()
        assert np.isfinite(rep.rhs)


def test_full_subsets_give_zero_geometric_estimate(rng):
    h = instance(rng, m=8, n=7)
    rep = geometric_bound(h, range(8), range(7))
    assert rep.terms["delta_X_S1"] == 0 and rep.terms["delta_Y_S2"] == 0
    assert rep.rhs == 0.0 and rep.holds


def test_size_guard(rng):
    h = instance(rng, m=30, n=10)
    with pytest.raises(DeskScaleError):
        max_norm_bound(h, [0], [0], size_guard=20)


def test_report_serialization():
    rep = BoundReport("max-norm", 1.0, 2.0, {"a": np.float64(3.0), "v": np.arange(2)})
    d = rep.to_dict()
    assert d["holds"] and d["terms"] == {"a": 3.0, "v": [0, 1]}
    assert '"max-norm"' in rep.to_json()
    assert rep.tightness == 0.5
    assert BoundReport("x", 1.0, 0.0).tightness == math.inf
    assert not BoundReport("x", 1.0, 0.5).holds


def test_delta_probe_never_increases_delta(rng):
    h = instance(rng)
    out = delta_monotonicity_probe(h, [0, 1], [0, 1], extra=[5, 9, 13])
    assert out["delta_after"] <= out["delta_before"]


def test_duplicate_points_keep_lipschitz_finite():
    # coincident points carry equal kernel values, so the 0/0 quotients are skipped
    X = np.array([[1.0, 0.0], [1.0, 0.0], [2.0, 1.0]])
    Y = np.array([[5.0, 5.0], [6.0, 5.0]])
    h = KernelMatrixHandle(KernelSpec("anisotropic-inverse"), X, Y)
    rep = geometric_bound(h, [0], [0])
    assert math.isfinite(rep.rhs) and rep.holds
    assert issubclass(NonFiniteLipschitzError, ValueError)
