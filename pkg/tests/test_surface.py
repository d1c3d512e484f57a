import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbcover.surface import (
    GridMismatchError,
    PolarBandError,
    ScalarField,
    SurfaceError,
    displacement_energy_cap,
    fd_gradient,
    integrate,
    make_surface,
    poisson_bracket,
    sup_norm,
)

TWO_PI = 2 * math.pi


def test_plane_chart():
    s = make_surface("plane", 1.0, (64, 64))
    assert s.rect == (0.0, 1.0, 0.0, 1.0)
    assert s.periodic == (False, False)
    assert s.nx * s.ny * s.cell_area == pytest.approx(1.0)


def test_sphere_chart_area():
    s = make_surface("sphere", 4 * math.pi, (128, 64))
    x0, x1, y0, y1 = s.rect
    assert (x1 - x0) * (y1 - y0) == pytest.approx(4 * math.pi)
    assert s.zmax == pytest.approx(1.0)
    assert s.periodic == (True, False)


@pytest.mark.parametrize("bad", [("cube", 1.0, (16, 16)), ("torus", -1.0, (16, 16)), ("torus", 1.0, (4, 16))])
def test_bad_surfaces(bad):
    with pytest.raises(SurfaceError):
        make_surface(*bad)


def test_xy_bracket_on_plane_is_one():
    s = make_surface("plane", 1.0, (64, 64))
    f = ScalarField.from_function(s, lambda x, y: x)
    g = ScalarField.from_function(s, lambda x, y: y)
    assert np.max(np.abs(poisson_bracket(f, g).values - 1.0)) < 1e-10


def test_bracket_antisymmetric_and_leibniz():
    s = make_surface("torus", 1.0, (64, 64))
    f = ScalarField.from_function(s, lambda x, y: np.sin(TWO_PI * x) * np.cos(TWO_PI * y))
    g = ScalarField.from_function(s, lambda x, y: np.cos(TWO_PI * (x + 2 * y)))
    fg = poisson_bracket(f, g).values
    gf = poisson_bracket(g, f).values
    assert np.max(np.abs(fg + gf)) == 0.0
    assert np.max(np.abs(poisson_bracket(f, f).values)) == 0.0


def test_grid_mismatch():
    a = make_surface("torus", 1.0, (32, 32))
    b = make_surface("torus", 1.0, (64, 64))
    with pytest.raises(GridMismatchError):
        poisson_bracket(ScalarField(a, np.zeros(a.shape)), ScalarField(b, np.zeros(b.shape)))


def test_nonfinite_rejected():
    s = make_surface("torus", 1.0, (16, 16))
    v = np.zeros(s.shape)
    v[3, 3] = np.nan
    with pytest.raises(SurfaceError):
        ScalarField(s, v)


def test_polar_band_guard():
    s = make_surface("sphere", 4 * math.pi, (64, 64))
    f = ScalarField.from_function(s, lambda th, z: np.cos(th) * z)
    g = ScalarField.from_function(s, lambda th, z: z)
    with pytest.raises(PolarBandError):
        poisson_bracket(f, g)
    pb = poisson_bracket(f, g, allow_polar=True)
    assert np.all(pb.values[~s.valid_mask()] == 0)


def test_integrate_and_sup():
    s = make_surface("torus", 1.0, (32, 32))
    f = ScalarField.from_function(s, lambda x, y: 1 + np.sin(TWO_PI * x))
    assert integrate(f) == pytest.approx(1.0, abs=1e-12)
    assert sup_norm(f) == pytest.approx(f.values.max())


def test_displacement_energy():
    assert displacement_energy_cap(math.pi, 4 * math.pi) == math.pi
    assert displacement_energy_cap(2.2 * math.pi, 4 * math.pi) == math.inf
    with pytest.raises(SurfaceError):
        displacement_energy_cap(5 * math.pi, 4 * math.pi)


def test_world_round_trip():
    s = make_surface("sphere", 4 * math.pi, (64, 64))
    for chart in s.atlas():
        p = chart.points()[chart.valid_mask().ravel()]
        back = chart.from_world(chart.to_world(p))
        assert np.allclose(back, p, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4))
def test_fourth_order_beats_second(kx, ky):
    s = make_surface("torus", 1.0, (64, 64))
    X, Y = s.coords()
    v = np.sin(TWO_PI * (kx * X + ky * Y))
    exact = TWO_PI * kx * np.cos(TWO_PI * (kx * X + ky * Y))
    e2 = np.abs(fd_gradient(s, v, 2)[0] - exact).max()
    e4 = np.abs(fd_gradient(s, v, 4)[0] - exact).max()
    assert e4 < e2


def test_fd_batch_dims():
    s = make_surface("plane", 1.0, (16, 16))
    X, Y = s.coords()
    stack = np.stack([X, 2 * Y, X * Y])
    gx, gy = fd_gradient(s, stack)
    assert gx.shape == stack.shape
    assert np.allclose(gx[0], 1) and np.allclose(gy[1], 2)
