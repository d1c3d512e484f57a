import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbcover import cover as cv
from pbcover.partition import (
    BumpProfile,
    BumpSpec,
    FamilyError,
    PartitionError,
    PartitionFamily,
    canonical_partition,
    normalized_partition,
    parametric_family,
    verify_partition,
)
from pbcover.surface import fd_gradient, make_surface


@pytest.fixture(scope="module")
def torus():
    return make_surface("torus", 1.0, (96, 96))


@pytest.fixture(scope="module")
def three_disk(torus):
    return cv.DiscreteCover(torus, [cv.translated_disk(torus, p, 0.6) for p in [(1 / 6, 1 / 6), (0.5, 0.5), (5 / 6, 5 / 6)]])


@pytest.mark.parametrize("kind", ["poly", "smoothstep", "flat-exp"])
def test_profile_shape(kind):
    prof = BumpProfile(kind, 3.0, 0.2)
    s = np.linspace(0, 1.2, 121)
    v = prof(s)
    assert v[0] == pytest.approx(1.0)
    assert np.all(v[s >= 1] == 0)
    assert np.all(np.diff(v) <= 1e-15)
    assert np.all(v[s <= 0.2] == pytest.approx(1.0))


def test_profile_validation():
    with pytest.raises(PartitionError):
        BumpProfile("poly", 1.0)
    with pytest.raises(PartitionError):
        BumpProfile("gauss")
    with pytest.raises(PartitionError):
        BumpProfile("poly", 2.0, 1.0)


def test_canonical_normalization(three_disk):
    F = canonical_partition(three_disk)
    rep = verify_partition(F)
    assert rep.ok and rep.max_deviation < 1e-12 and rep.min_value >= 0


def test_quotient_gradients_match_fd():
    # both are second-order approximations of the same derivative: their gap
    # must shrink roughly fourfold when the grid is refined
    gaps = []
    for n in (96, 192):
        T = make_surface("torus", 1.0, (n, n))
        cov = cv.DiscreteCover(T, [cv.translated_disk(T, p, 0.6) for p in [(1 / 6, 1 / 6), (0.5, 0.5), (5 / 6, 5 / 6)]])
        F = canonical_partition(cov)
        gx, gy = fd_gradient(T, F.fields)
        gaps.append(max(np.abs(gx - F.gx).max(), np.abs(gy - F.gy).max()))
        # quotient-rule gradients sum to zero up to rounding
        assert np.abs(F.gx.sum(axis=0)).max() < 1e-9 * np.abs(F.gx).max()
    assert gaps[0] / gaps[1] > 3.0


def test_support_leaves_inner_disk(three_disk):
    e = three_disk.embeddings[0]
    bad = [BumpSpec(BumpProfile(), e.inner_extent * 1.01)] * 3
    with pytest.raises(PartitionError):
        normalized_partition(three_disk, bad)


def test_zero_mass_rejected(three_disk):
    specs = [BumpSpec(BumpProfile(), e.inner_extent, 0.0) for e in three_disk.embeddings]
    with pytest.raises(PartitionError):
        normalized_partition(three_disk, specs)


def test_family_default_is_canonical(three_disk):
    fam = PartitionFamily(three_disk)
    assert fam.dim == 3 + 3 + 6
    a = fam.partition(fam.default)
    b = canonical_partition(three_disk)
    assert np.array_equal(a.fields, b.fields)


def test_family_box(three_disk):
    fam = PartitionFamily(three_disk)
    with pytest.raises(FamilyError):
        fam.specs(fam.upper + 1)
    with pytest.raises(FamilyError):
        fam.specs(np.zeros(fam.dim + 1))
    x = fam.to_unit(fam.default)
    assert np.allclose(fam.from_unit(x), fam.default)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=12, max_size=12))
def test_family_partitions_stay_normalized(three_disk, u):
    fam = PartitionFamily(three_disk)
    theta = fam.from_unit(np.array(u))
    try:
        F = fam.partition(theta)
    except PartitionError:
        return  # a parameter that loses coverage is rejected, never mis-normalized
    rep = verify_partition(F)
    assert rep.max_deviation < 1e-10 and all(rep.support_ok)


def test_parametric_family_helper(three_disk):
    F = parametric_family(three_disk, vary=("shape",))
    assert F.n == 3


def test_continuous_partition_sparse(torus):
    wp, ts = cv.boustrophedon_path(torus, 2)
    cc = cv.make_continuous_cover(torus, wp, 0.3, 64, times=ts)
    F = canonical_partition(cc)
    assert F.kind == "continuous" and F.n_t == 64
    assert verify_partition(F).max_deviation < 1e-12
    assert F.dense_t().shape == (64,) + torus.shape


def test_relabeled_keeps_total(three_disk):
    F = canonical_partition(three_disk)
    G = F.relabeled([2, 0, 1])
    assert np.abs(G.total() - F.total()).max() < 1e-15
    assert G.parent[0] is F


def test_sphere_caps_normalize():
    S = make_surface("sphere", 4 * math.pi, (128, 64))
    axes = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / math.sqrt(3)
    cov = cv.DiscreteCover(S, [cv.cap_at_axis(S, a, 1.5 * math.pi) for a in axes])
    assert verify_partition(canonical_partition(cov)).max_deviation < 1e-12
