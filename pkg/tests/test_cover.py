import math

import numpy as np
import pytest

from pbcover import cover as cv
from pbcover.partition import canonical_partition, verify_partition
from pbcover.surface import make_surface


@pytest.fixture(scope="module")
def torus():
    return make_surface("torus", 1.0, (128, 128))


@pytest.fixture(scope="module")
def sphere():
    return make_surface("sphere", 4 * math.pi, (128, 64))


def test_disk_area_matches_capacity(torus):
    e = cv.translated_disk(torus, (0.5, 0.5), 0.2)
    assert e.chart_area() == pytest.approx(0.2, rel=0.02)


def test_disk_wraps_periodically(torus):
    e = cv.translated_disk(torus, (0.0, 0.0), 0.2)
    assert e.contains(np.array([[0.99, 0.99], [0.01, 0.98]])).all()
    assert not e.contains(np.array([[0.5, 0.5]]))[0]


@pytest.mark.parametrize("args", [((0.5, 0.5), 0.9), ((0.5, 0.5), 0.0), ((0.5, 0.5), 1.5)])
def test_disk_capacity_errors(torus, args):
    with pytest.raises(cv.EmbeddingError):
        cv.translated_disk(torus, *args)


def test_plane_overflow():
    p = make_surface("plane", 1.0, (64, 64))
    with pytest.raises(cv.EmbeddingError):
        cv.translated_disk(p, (0.1, 0.1), 0.2)


@pytest.mark.parametrize("kind", ["disk", "cap", "band"])
def test_embeddings_are_symplectic(torus, sphere, kind):
    if kind == "disk":
        e = cv.translated_disk(torus, (0.3, 0.6), 0.3)
    elif kind == "cap":
        e = cv.cap_at_axis(sphere, np.array([0.3, -0.5, 0.8]), 1.5 * math.pi)
    else:
        e = cv.band_embedding(torus, "v", 0.4, 0.5)
    assert cv.symplectic_residual(e) < 1e-6


def test_cap_area(sphere):
    e = cv.cap_at_axis(sphere, [0, 0, 1], math.pi)
    # area pi: angular radius 60 degrees
    assert e.angular_radius == pytest.approx(math.pi / 3)
    assert e.chart_area() == pytest.approx(math.pi, rel=0.03)


def test_cap_contains_pole(sphere):
    e = cv.cap_at_axis(sphere, [0, 0, 1], math.pi)
    assert e.contains(sphere.from_world(np.array([[0, 0, 1.0]])))[0]


def test_two_disks_cannot_cover_torus(torus):
    with pytest.raises(cv.CoverError):
        cv.DiscreteCover(torus, [cv.translated_disk(torus, (0.25, 0.25), 0.45),
                                 cv.translated_disk(torus, (0.75, 0.75), 0.45)])


def test_two_bands_cover_torus(torus):
    cov = cv.DiscreteCover(torus, [cv.band_embedding(torus, "h", 0.25, 0.6),
                                   cv.band_embedding(torus, "h", 0.75, 0.6)])
    assert cov.n == 2


def test_cover_error_lists_points(torus):
    with pytest.raises(cv.CoverError, match="miss"):
        cv.DiscreteCover(torus, [cv.translated_disk(torus, (0.5, 0.5), 0.3)])


def test_boustrophedon_step_bound(torus):
    wp, ts = cv.boustrophedon_path(torus, 2)
    cc = cv.make_continuous_cover(torus, wp, 0.3, 128, times=ts)
    assert cc.max_step <= cc.embeddings[0].radius
    # one horizontal loop does not cover
    with pytest.raises(cv.CoverError):
        cv.make_continuous_cover(torus, [(0.0, 0.5), (0.5, 0.5), (1.0, 0.5)], 0.3, 64)


def test_step_bound_violation(torus):
    # a 3 x 3 lattice covers, but consecutive centres are 1/3 apart, beyond the radius
    embs = [cv.translated_disk(torus, ((i + 0.5) / 3, (j + 0.5) / 3), 0.3) for i in range(3) for j in range(3)]
    with pytest.raises(cv.CoverError, match="jump"):
        cv.ContinuousCover(torus, embs)
    assert cv.ContinuousCover(torus, embs, step_bound=math.inf).max_step > embs[0].radius


def test_whole_chart_on_plane():
    p = make_surface("plane", 1.0, (32, 32))
    cc = cv.make_continuous_cover(p, [(0.5, 0.5)], 1.0, 3)
    assert all(isinstance(e, cv.WholeChart) for e in cc.embeddings)


def test_sphere_path_interpolation(sphere):
    a, b = sphere.from_world(np.array([0, 0, 1.0])), sphere.from_world(np.array([1.0, 0, 0]))
    C = cv.interpolate_centers(sphere, [a, b], np.array([0.0, 0.5, 1.0]))
    w = sphere.to_world(C)
    assert np.allclose(np.linalg.norm(w, axis=1), 1)
    assert np.allclose(w[1], [math.sqrt(0.5), 0, math.sqrt(0.5)], atol=1e-12)


def test_inclusion_matches_grid(torus):
    wp, ts = cv.boustrophedon_path(torus, 2)
    cc = cv.make_continuous_cover(torus, wp, 0.3, 32, times=ts)
    F = canonical_partition(cc)
    analytic = cv.inclusion_matrix(cc, F)
    pts = torus.points()
    for i in range(0, F.n, 5):
        P = pts[F.fields[i].ravel() > 0]
        for j in range(0, cc.n_t, 3):
            grid = bool(cc.embeddings[j].contains(P).all())
            # the analytic test is exact for disks; the grid test can only be more permissive
            assert analytic[i, j] <= grid


def test_coarse_grain_requires_divisor(torus):
    wp, ts = cv.boustrophedon_path(torus, 2)
    cc = cv.make_continuous_cover(torus, wp, 0.3, 32, times=ts)
    with pytest.raises(cv.CoverError):
        cv.coarse_grain(cc, canonical_partition(cc), 5)


def test_continuous_from_discrete_windows(torus):
    cov = cv.DiscreteCover(torus, [cv.translated_disk(torus, p, 0.6) for p in [(1 / 6, 1 / 6), (0.5, 0.5), (5 / 6, 5 / 6)]])
    F = canonical_partition(cov)
    cc, Fc = cv.continuous_from_discrete(cov, F)
    assert cc.n_t == 24
    assert verify_partition(Fc).max_deviation < 1e-12
    with pytest.raises(cv.CoverError):
        cv.continuous_from_discrete(cov, F, 25)


def test_quartic_profile_mean():
    rho = cv.quartic_profile(16)
    assert rho.mean() == pytest.approx(1.0, abs=1e-15)
    assert np.all(rho > 0)


def test_bicover_conditions(torus):
    small = make_surface("torus", 1.0, (32, 32))
    g = cv.translation_family(small, 0.3)
    wp, ts = cv.boustrophedon_path(small, 2)
    GI = cv.make_continuous_cover(small, wp, 0.3, 16, times=ts)
    bc = cv.make_bicover(g, GI, (0.5, 0.5), 0.4, 32, 8, 14, cv.quartic_profile(4))
    assert bc.conditions["outside_residual"] == 0.0
    assert bc.fiber_mass() == pytest.approx(1.0)
    alpha = np.ones(32 * 32)
    assert np.allclose(bc.induced_I_weight(alpha), 1.0)
    with pytest.raises(cv.CoverError):
        cv.make_bicover(g, GI, (0.5, 0.5), 0.1, 32, 8, 14, cv.quartic_profile(4))
