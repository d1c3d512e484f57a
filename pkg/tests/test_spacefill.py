from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbcover.spacefill import (
    CubePaving,
    CurveError,
    HilbertCurve,
    PiecewiseConstantWeight,
    change_of_variables_residual,
    concat_paving_curve,
    convention_table,
    diameter_bound,
    preimage_measure,
    preimage_measures,
    pushforward_weight,
    uniform_convergence_gap,
)


def wiki_d2xy(n, d):
    """Textbook 2-D Hilbert index -> cell conversion, used as an independent oracle."""
    x = y = 0
    s, t = 1, d
    while s < n:
        rx = 1 & (t // 2)
        ry = 1 & (t ^ rx)
        if ry == 0:
            if rx == 1:
                x, y = s - 1 - x, s - 1 - y
            x, y = y, x
        x += s * rx
        y += s * ry
        t //= 4
        s *= 2
    return x, y


@pytest.mark.parametrize("d,m", [(1, 3), (2, 1), (2, 4), (3, 2), (3, 3), (4, 2)])
def test_cells_are_a_lattice_path(d, m):
    c = HilbertCurve(d, m).cells.astype(np.int64)
    assert len({tuple(r) for r in c}) == 1 << (d * m)
    steps = np.abs(np.diff(c, axis=0)).sum(axis=1)
    assert np.all(steps == 1)


@pytest.mark.parametrize("m", [1, 2, 3, 5])
def test_same_curve_as_textbook_up_to_symmetry(m):
    # the textbook curve is a reflection/rotation of ours; compare step patterns
    n = 1 << m
    ref = np.array([wiki_d2xy(n, k) for k in range(n * n)])
    ours = HilbertCurve(2, m).cells.astype(np.int64)
    found = False
    for swap in (False, True):
        for fx in (False, True):
            for fy in (False, True):
                r = ref[:, ::-1] if swap else ref.copy()
                if fx:
                    r[:, 0] = n - 1 - r[:, 0]
                if fy:
                    r[:, 1] = n - 1 - r[:, 1]
                found |= np.array_equal(r, ours)
    assert found


def test_convention_2d():
    assert convention_table(2) == [(0, 0), (0, 1), (1, 1), (1, 0)]


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 3), st.integers(1, 4), st.data())
def test_preimage_measure_exact(d, m, data):
    curve = HilbertCurve(d, m)
    k = data.draw(st.integers(0, m))
    cell = data.draw(st.lists(st.integers(0, (1 << k) - 1), min_size=d, max_size=d))
    assert preimage_measure(curve, k, cell) == Fraction(1, 1 << (d * k))


def test_preimage_measures_sum_to_one():
    ms = preimage_measures(HilbertCurve(2, 3), 2)
    assert sum(ms.values()) == 1 and len(ms) == 16


def test_bad_level():
    with pytest.raises(CurveError):
        preimage_measure(HilbertCurve(2, 2), 3, (0, 0))


def test_curve_endpoints_and_continuity():
    c = HilbertCurve(2, 4)
    assert np.allclose(c.point(0.0), [0, 0])
    assert np.allclose(c.point(1.0), [1, 0])
    t = np.linspace(0, 1, 20001)
    p = c.point(t)
    assert np.max(np.linalg.norm(np.diff(p, axis=0), axis=1)) < 0.01


@pytest.mark.parametrize("d,m", [(2, 3), (2, 5), (3, 3)])
def test_approximants_converge(d, m):
    assert uniform_convergence_gap(d, m) <= diameter_bound(d, m) + 1e-12


def test_change_of_variables():
    c = HilbertCurve(2, 6)
    f = lambda p: np.sin(3 * p[:, 0]) * np.exp(p[:, 1])  # noqa: E731
    assert change_of_variables_residual(f, c, 1 << 12) < 1e-3


def test_pushforward_aligned_and_warned():
    c = HilbertCurve(2, 2)
    vals = np.linspace(-1, 1, 16)
    aT, aligned = pushforward_weight(PiecewiseConstantWeight.uniform(vals), c)
    assert aligned
    for k, cell in enumerate(c.cells):
        assert aT.values[tuple(cell)] == vals[k]
    coarse = PiecewiseConstantWeight("I", np.array([1.0, -1.0]), (Fraction(0), Fraction(1, 3), Fraction(1)))
    with pytest.warns(UserWarning):
        _, aligned = pushforward_weight(coarse, c)
    assert not aligned


def test_weight_validation():
    with pytest.raises(CurveError):
        PiecewiseConstantWeight.uniform([2.0])


def test_paving_curve_measures():
    # a 2 x 2 grid of quarter squares filling the unit square
    pav = CubePaving.grid((2, 2), 0.5, Fraction(1, 4))
    pc = concat_paving_curve(pav, 2)
    for k in range(4):
        assert pc.cube_preimage_measure(k) == Fraction(1, 4)
    t = np.linspace(0, 1, 4001)
    p = pc.point(t)
    assert np.max(np.linalg.norm(np.diff(p, axis=0), axis=1)) < 0.02
