import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pbcover import cover as cv
from pbcover import pbnorm
from pbcover.partition import canonical_partition
from pbcover.pbnorm import (
    PbConfig,
    PbError,
    bracket_matrix,
    inf1_norm_exact,
    inf1_norm_heuristic,
    pb_of_partition,
    rank2_norm,
)
from pbcover.surface import make_surface


def brute(P):
    """max over a in {+-1}^N of ||a^T P||_1, by listing every sign vector."""
    n = P.shape[0]
    if n == 0:
        return 0.0
    A = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
    return float(np.abs(A @ P).sum(axis=1).max())


def antisym(n, rng):
    M = rng.standard_normal((n, n))
    return M - M.T


@pytest.fixture(scope="module")
def torus():
    return make_surface("torus", 1.0, (48, 48))


@pytest.fixture(scope="module")
def three_disk(torus):
    cov = cv.DiscreteCover(torus, [cv.translated_disk(torus, p, 0.6) for p in [(1 / 6, 1 / 6), (0.5, 0.5), (5 / 6, 5 / 6)]])
    return canonical_partition(cov)


@pytest.mark.parametrize("n", range(1, 11))
def test_exact_matches_brute_force(n):
    rng = np.random.default_rng(n)
    for _ in range(3):
        P = antisym(n, rng)
        val, a, b = inf1_norm_exact(P)
        ref = brute(P)
        assert val == pytest.approx(ref, rel=1e-12)
        assert abs(a @ P @ b) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("n", [4, 8, 12])
def test_heuristic_is_a_lower_bound(n):
    rng = np.random.default_rng(100 + n)
    for _ in range(4):
        P = antisym(n, rng)
        exact = inf1_norm_exact(P)[0]
        val, a, b = inf1_norm_heuristic(P, restarts=16, seed=3)
        assert 0 < val <= exact * (1 + 1e-12)
        assert abs(a @ P @ b) == pytest.approx(val, rel=1e-12)


def test_exact_threshold():
    with pytest.raises(PbError):
        inf1_norm_exact(np.zeros((17, 17)))
    with pytest.raises(PbError):
        inf1_norm_exact(np.zeros((3, 4)))
    with pytest.raises(PbError):
        inf1_norm_heuristic(np.zeros((2, 2)), restarts=0)


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.integers(1, 9), elements=st.floats(-10, 10)), st.data())
def test_rank2_walk_matches_brute_force(u, data):
    v = data.draw(arrays(float, u.size, elements=st.floats(-10, 10)))
    P = np.outer(u, v) - np.outer(v, u)
    val, a, b = rank2_norm(u, v)
    ref = brute(P)
    assert val == pytest.approx(ref, rel=1e-9, abs=1e-9)
    assert abs(a @ P @ b) == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_bracket_matrix_matches_dense_oracle(three_disk):
    F = three_disk
    bmf = bracket_matrix(F)
    assert bmf.antisymmetry_residual() == 0.0
    for i in range(F.n):
        for j in range(F.n):
            dense = F.weights[i] * F.weights[j] * (F.gx[i] * F.gy[j] - F.gy[i] * F.gx[j])
            assert np.abs(bmf.entry(i, j) - dense).max() <= 1e-12 * max(1.0, np.abs(dense).max())


def test_bounds_dominate(three_disk):
    bmf = bracket_matrix(three_disk)
    b = bmf.bounds()
    for p in range(0, bmf.npts, 97):
        assert brute(bmf.matrix(p)) <= b[p]


@pytest.mark.parametrize("method", ["enum", "zonotope", "auto"])
def test_pb_matches_pointwise_brute_force(three_disk, method):
    bmf = bracket_matrix(three_disk)
    ref = max(brute(bmf.matrix(p)) for p in range(bmf.npts))
    rep = pb_of_partition(three_disk, method)
    assert rep.value == pytest.approx(ref, rel=1e-12)
    assert rep.recompute(bmf) == pytest.approx(rep.value, rel=1e-12)


def test_heuristic_on_field_below_exact(three_disk):
    exact = pb_of_partition(three_disk, "zonotope").value
    h = pb_of_partition(three_disk, "heuristic").value
    assert h <= exact * (1 + 1e-12)
    assert h > 0.5 * exact


def test_permutation_invariance(three_disk):
    base = pb_of_partition(three_disk).value
    for perm in ([2, 0, 1], [1, 0, 2]):
        assert pb_of_partition(three_disk.relabeled(perm)).value == pytest.approx(base, rel=1e-12)


def test_thread_determinism(three_disk):
    a = pb_of_partition(three_disk, config=PbConfig(threads=1)).to_json()
    for t in (2, 3, 5):
        assert pb_of_partition(three_disk, config=PbConfig(threads=t)).to_json() == a


def test_zero_witness_for_bands(torus):
    cov = cv.DiscreteCover(torus, [cv.band_embedding(torus, "h", 0.25, 0.6), cv.band_embedding(torus, "h", 0.75, 0.6)])
    rep = pb_of_partition(canonical_partition(cov))
    assert rep.value == 0.0 and rep.zero_witness == 0.0
    assert pb_of_partition(canonical_partition(
        cv.DiscreteCover(torus, [cv.translated_disk(torus, p, 0.6) for p in [(1 / 6, 1 / 6), (0.5, 0.5), (5 / 6, 5 / 6)]])
    )).zero_witness is None


def test_unknown_method(three_disk):
    with pytest.raises(PbError):
        pb_of_partition(three_disk, "simplex")


@pytest.mark.skipif(pbnorm.BACKEND != "cython", reason="compiled kernels not built")
@pytest.mark.parametrize("method", ["enum", "zonotope", "heuristic", "auto"])
def test_backends_agree(three_disk, method):
    bmf = bracket_matrix(three_disk)
    try:
        pbnorm.set_backend("python")
        slow = pb_of_partition(three_disk, method, bmf=bmf)
    finally:
        pbnorm.set_backend("cython")
    fast = pb_of_partition(three_disk, method, bmf=bmf)
    assert fast.value == pytest.approx(slow.value, rel=1e-12)
    assert fast.point_index == slow.point_index


@pytest.mark.skipif(pbnorm.BACKEND != "cython", reason="compiled kernels not built")
def test_backends_agree_on_dense():
    from pbcover import _core, _fallback

    rng = np.random.default_rng(7)
    for n in (3, 6, 9):
        P = antisym(n, rng)
        assert _core.enum_dense(P)[0] == pytest.approx(_fallback.enum_dense(P)[0], rel=1e-12)
