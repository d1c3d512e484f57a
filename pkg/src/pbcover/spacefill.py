"""Measure-preserving Hilbert curves, cube pavings and weight pushforward.

Orientation convention
----------------------
Cells of level ``m`` are visited in the order produced by Skilling's
transpose algorithm (J. Skilling, "Programming the Hilbert curve", 2004).
In two dimensions the level-1 quadrants are visited

    (0,0) -> (0,1) -> (1,1) -> (1,0)

so the curve enters at the origin and leaves at ``(1, 0)``.  The same table
generalizes to any ``d``; :func:`convention_table` prints it.

The order-``m`` approximant runs, on the ``k``-th interval of length
``2^(-d m)``, from the entry corner of cell ``k`` to its centre (first half of
the interval) and from the centre to the exit corner (second half).  Entry and
exit corners are the values of the limit curve at the interval endpoints, so
consecutive approximants agree at dyadic times and differ by at most one cell
diameter elsewhere.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np


class CurveError(ValueError):
    pass


class AlignmentWarning(UserWarning):
    pass


# -- index <-> cell --------------------------------------------------------


def _transpose(h: np.ndarray, d: int, m: int) -> list[np.ndarray]:
    """Spread the d*m bits of each index into d words of m bits (MSB first)."""
    X = [np.zeros_like(h) for _ in range(d)]
    for j in range(m):
        for i in range(d):
            bit = (h >> np.uint64((m - 1 - j) * d + (d - 1 - i))) & np.uint64(1)
            X[i] |= bit << np.uint64(m - 1 - j)
    return X


def hilbert_cells(d: int, m: int, h) -> np.ndarray:
    """Integer coordinates (len(h), d) of the level-m cells visited at indices h."""
    h = np.atleast_1d(np.asarray(h, dtype=np.uint64))
    X = _transpose(h, d, m)
    # Gray decode
    t = X[d - 1] >> np.uint64(1)
    for i in range(d - 1, 0, -1):
        X[i] ^= X[i - 1]
    X[0] ^= t
    # undo excess work
    N = np.uint64(1) << np.uint64(m)
    Q = np.uint64(2)
    while Q != N and m > 0:
        P = Q - np.uint64(1)
        for i in range(d - 1, -1, -1):
            on = (X[i] & Q) != 0
            x0_flip = X[0] ^ P
            swap = (X[0] ^ X[i]) & P
            new0 = np.where(on, x0_flip, X[0] ^ swap)
            newi = np.where(on, X[i], X[i] ^ swap) if i else new0
            X[0] = new0
            if i:
                X[i] = newi
        Q <<= np.uint64(1)
    return np.stack(X, axis=-1).astype(np.int64)


def convention_table(d: int) -> list[tuple[int, ...]]:
    """Visit order of the 2^d level-1 sub-cubes."""
    return [tuple(int(v) for v in row) for row in hilbert_cells(d, 1, np.arange(2**d))]


# -- the curve -------------------------------------------------------------


@dataclass(frozen=True)
class HilbertCurve:
    d: int
    order: int
    convention: str = "skilling"

    def __post_init__(self):
        if self.d < 1 or self.order < 1:
            raise CurveError("need d >= 1 and order >= 1")
        if self.d * (self.order + 1) > 62:
            raise CurveError("d*(order+1) must fit in 62 bits")

    @property
    def n_cells(self) -> int:
        return 1 << (self.d * self.order)

    @property
    def side(self) -> int:
        return 1 << self.order

    @cached_property
    def cells(self) -> np.ndarray:
        """Level-m cell coordinates for every index, shape (n_cells, d)."""
        return hilbert_cells(self.d, self.order, np.arange(self.n_cells, dtype=np.uint64))

    @cached_property
    def vertices(self) -> np.ndarray:
        """Integer corners c(k 2^-dm) * 2^m for k = 0..n_cells, shape (n_cells+1, d)."""
        d, m, K = self.d, self.order, self.n_cells
        fine = np.arange(K + 1, dtype=np.uint64) << np.uint64(d)
        fine[-1] = np.uint64((K << d) - 1)
        sub = hilbert_cells(d, m + 1, fine)
        # nearest level-m vertex to the centre of the first (last) sub-cell
        return (sub + 1) >> 1

    def point(self, t) -> np.ndarray:
        """Order-m approximant at t (scalar or array) in [0, 1]^d."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t_arr < 0) or np.any(t_arr > 1) or not np.all(np.isfinite(t_arr)):
            raise CurveError("t must lie in [0, 1]")
        K = self.n_cells
        s = t_arr * K
        k = np.minimum(np.floor(s).astype(np.int64), K - 1)
        frac = s - k
        scale = 1.0 / self.side
        entry = self.vertices[k] * scale
        exit_ = self.vertices[k + 1] * scale
        centre = (self.cells[k] + 0.5) * scale
        lam = np.where(frac < 0.5, 2 * frac, 2 * frac - 1)[:, None]
        out = np.where((frac < 0.5)[:, None], entry + lam * (centre - entry), centre + lam * (exit_ - centre))
        return out[0] if np.ndim(t) == 0 else out

    def quadrature(self):
        """Midpoint rule on the level-m cells: (nodes (K, d), weights (K,))."""
        nodes = (self.cells + 0.5) / self.side
        return nodes, np.full(self.n_cells, 1.0 / self.n_cells)


def hilbert_point(curve: HilbertCurve, t) -> np.ndarray:
    return curve.point(t)


def preimage_measure(curve: HilbertCurve, level: int, cell) -> Fraction:
    """Exact Lebesgue measure of c^{-1}(cell) for a dyadic cell of ``level``.

    Counts the level-m curve intervals whose image cell lies in ``cell``.
    """
    if level > curve.order or level < 0:
        raise CurveError(f"cell level {level} exceeds curve order {curve.order}")
    cell = np.asarray(cell, dtype=np.int64)
    if cell.shape != (curve.d,) or np.any(cell < 0) or np.any(cell >= (1 << level)):
        raise CurveError(f"bad level-{level} cell index {cell.tolist()}")
    coarse = curve.cells >> (curve.order - level)
    count = int(np.count_nonzero(np.all(coarse == cell, axis=1)))
    return Fraction(count, curve.n_cells)


def preimage_measures(curve: HilbertCurve, level: int) -> dict[tuple[int, ...], Fraction]:
    """Preimage measure of every dyadic cell of ``level`` (exact)."""
    if level > curve.order or level < 0:
        raise CurveError(f"cell level {level} exceeds curve order {curve.order}")
    coarse = curve.cells >> (curve.order - level)
    flat = np.ravel_multi_index(coarse.T, (1 << level,) * curve.d)
    counts = np.bincount(flat, minlength=(1 << level) ** curve.d)
    shape = (1 << level,) * curve.d
    return {
        tuple(int(v) for v in np.unravel_index(i, shape)): Fraction(int(c), curve.n_cells)
        for i, c in enumerate(counts)
    }


def measure_report(curve: HilbertCurve, level: int) -> list[dict]:
    return [
        {"level": level, "cell_index": list(cell), "measure_num": q.numerator, "measure_den": q.denominator}
        for cell, q in preimage_measures(curve, level).items()
    ]


def export_curve_csv(curve, path, n_samples: int = 1025) -> None:
    t = np.linspace(0.0, 1.0, n_samples)
    pts = curve.point(t)
    cols = ",".join(f"x{i + 1}" for i in range(pts.shape[1]))
    with open(path, "w") as fh:
        fh.write(f"t,{cols}\n")
        for ti, p in zip(t, pts):
            fh.write(f"{ti:.17g}," + ",".join(f"{v:.17g}" for v in p) + "\n")


# -- pavings ---------------------------------------------------------------


@dataclass(frozen=True)
class Cube:
    origin: tuple[float, ...]
    side: float

    def corners(self) -> np.ndarray:
        d = len(self.origin)
        offs = np.array(list(itertools.product((0.0, 1.0), repeat=d)))
        return np.asarray(self.origin) + self.side * offs

    def contains(self, pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        o = np.asarray(self.origin)
        return np.all((pts >= o - tol) & (pts <= o + self.side + tol), axis=-1)


@dataclass(frozen=True)
class CubePaving:
    """Closed cubes tiling a rectangle of unit volume, in visiting order.

    ``volumes`` are exact; each cube's side is ``volume**(1/d)`` up to float
    rounding.
    """

    cubes: tuple[Cube, ...]
    volumes: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.cubes) != len(self.volumes) or not self.cubes:
            raise CurveError("paving needs one volume per cube")
        if abs(float(sum(self.volumes)) - 1.0) > 1e-12:
            raise CurveError(f"volumes sum to {float(sum(self.volumes))}, not 1")
        d = self.d
        for c, v in zip(self.cubes, self.volumes):
            if len(c.origin) != d:
                raise CurveError("mixed dimensions in paving")
            if abs(c.side**d - float(v)) > 1e-12:
                raise CurveError(f"cube side {c.side} inconsistent with volume {v}")
        for a, b in zip(self.cubes, self.cubes[1:]):
            lo = np.maximum(a.origin, b.origin)
            hi = np.minimum(np.add(a.origin, a.side), np.add(b.origin, b.side))
            if np.any(lo > hi + 1e-12):
                raise CurveError("consecutive cubes do not touch")

    @property
    def d(self) -> int:
        return len(self.cubes[0].origin)

    @classmethod
    def grid(cls, counts: tuple[int, ...], side: float, volume: Fraction) -> "CubePaving":
        """Boustrophedon order over a regular grid of equal cubes (d = 2 only)."""
        nx, ny = counts
        cubes = []
        for i in range(nx):
            col = range(ny) if i % 2 == 0 else range(ny - 1, -1, -1)
            for j in col:
                cubes.append(Cube((i * side, j * side), side))
        return cls(tuple(cubes), (volume,) * len(cubes))


def _symmetries(d: int):
    """All isometries of [0,1]^d as (permutation, flips)."""
    for perm in itertools.permutations(range(d)):
        for flips in itertools.product((False, True), repeat=d):
            yield perm, flips


def _apply_sym(sym, x: np.ndarray) -> np.ndarray:
    perm, flips = sym
    y = x[..., list(perm)]
    return np.where(np.asarray(flips), 1.0 - y, y)


@dataclass(frozen=True)
class PavingCurve:
    paving: CubePaving
    base: HilbertCurve
    syms: tuple = field(repr=False)
    starts: tuple[Fraction, ...] = field(repr=False)

    @property
    def d(self) -> int:
        return self.paving.d

    def _local(self, k: int, x: np.ndarray) -> np.ndarray:
        cube = self.paving.cubes[k]
        return np.asarray(cube.origin) + cube.side * _apply_sym(self.syms[k], x)

    def point(self, t) -> np.ndarray:
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t_arr < 0) or np.any(t_arr > 1):
            raise CurveError("t must lie in [0, 1]")
        starts = np.array([float(s) for s in self.starts] + [1.0])
        k = np.clip(np.searchsorted(starts, t_arr, side="right") - 1, 0, len(self.syms) - 1)
        out = np.empty((t_arr.size, self.d))
        for kk in np.unique(k):
            sel = k == kk
            v = float(self.paving.volumes[kk])
            s = np.clip((t_arr[sel] - starts[kk]) / v, 0.0, 1.0)
            out[sel] = self._local(kk, self.base.point(s))
        return out[0] if np.ndim(t) == 0 else out

    def quadrature(self):
        nodes, weights = [], []
        bn, bw = self.base.quadrature()
        for k, v in enumerate(self.paving.volumes):
            nodes.append(self._local(k, bn))
            weights.append(bw * float(v))
        return np.vstack(nodes), np.concatenate(weights)

    def cube_preimage_measure(self, k: int) -> Fraction:
        """Exact measure of the I-intervals whose image cells lie in cube k."""
        base_len = Fraction(1, self.base.n_cells)
        centres = (self.base.cells + 0.5) / self.base.side
        total = Fraction(0)
        for j, v in enumerate(self.paving.volumes):
            inside = self.paving.cubes[k].contains(self._local(j, centres), tol=0.0)
            total += int(np.count_nonzero(inside)) * base_len * v
        return total


def concat_paving_curve(paving: CubePaving, order: int) -> PavingCurve:
    """Glue rescaled Hilbert curves through the cubes of a paving.

    Each cube receives an isometry of the unit cube so that the exit corner of
    one piece is the entry corner of the next.
    """
    d = paving.d
    base = HilbertCurve(d, order)
    e0 = base.vertices[0] / base.side
    e1 = base.vertices[-1] / base.side
    cubes = paving.cubes
    syms = list(_symmetries(d))

    def ends(k, sym):
        c = cubes[k]
        return (
            np.asarray(c.origin) + c.side * _apply_sym(sym, e0),
            np.asarray(c.origin) + c.side * _apply_sym(sym, e1),
        )

    chosen: list = []

    def search(k, entry):
        if k == len(cubes):
            return True
        for sym in syms:
            a, b = ends(k, sym)
            if entry is not None and np.max(np.abs(a - entry)) > 1e-12:
                continue
            if k + 1 < len(cubes) and not cubes[k + 1].contains(b[None, :])[0]:
                continue
            chosen.append(sym)
            if search(k + 1, b):
                return True
            chosen.pop()
        return False

    if not search(0, None):
        raise CurveError("no endpoint-matching orientation exists for this paving")
    starts, acc = [], Fraction(0)
    for v in paving.volumes:
        starts.append(acc)
        acc += v
    return PavingCurve(paving, base, tuple(chosen), tuple(starts))


# -- weights ---------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseConstantWeight:
    """A [-1, 1]-valued step function.

    On the interval (``domain == "I"``) ``breakpoints`` are exact rationals
    ``0 = b_0 < ... < b_n = 1`` and ``values`` has length n.  On the cube
    (``domain == "T"``) ``values`` is a d-dimensional array over the dyadic
    cells of ``level``.
    """

    domain: str
    values: np.ndarray
    breakpoints: tuple[Fraction, ...] | None = None
    level: int | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if np.any(np.abs(vals) > 1 + 1e-15):
            raise CurveError("weight values must lie in [-1, 1]")
        if self.domain == "I":
            bp = self.breakpoints
            if bp is None or len(bp) != vals.size + 1:
                raise CurveError("need len(values)+1 breakpoints")
            if bp[0] != 0 or bp[-1] != 1 or any(a >= b for a, b in zip(bp, bp[1:])):
                raise CurveError("breakpoints must increase strictly from 0 to 1")
        elif self.domain != "T":
            raise CurveError(f"unknown weight domain {self.domain!r}")

    @classmethod
    def uniform(cls, values) -> "PiecewiseConstantWeight":
        values = np.asarray(values, dtype=float)
        n = values.size
        return cls("I", values, tuple(Fraction(i, n) for i in range(n + 1)))

    def average_over(self, n: int) -> tuple[np.ndarray, bool]:
        """Mean value on each of n equal intervals, and whether every interval
        lies inside a single piece."""
        if self.domain != "I":
            raise CurveError("average_over applies to interval weights")
        bp = self.breakpoints
        aligned = all((b * n).denominator == 1 for b in bp)
        if aligned:
            edges = np.array([int(b * n) for b in bp])
            out = np.repeat(np.asarray(self.values, dtype=float), np.diff(edges))
            return out, True
        edges = np.array([float(b) for b in bp])
        grid = np.arange(n + 1) / n
        cum = np.concatenate([[0.0], np.cumsum(np.diff(edges) * self.values)])
        F = np.interp(grid, edges, cum)
        return np.diff(F) * n, False


def pushforward_weight(alpha: PiecewiseConstantWeight, curve: HilbertCurve):
    """Radon-Nikodym density of c_*(alpha du) on the level-m cells.

    Returns ``(alpha_T, aligned)``.  When ``alpha`` is not constant on every
    level-m interval the conditional average is used and an
    :class:`AlignmentWarning` is issued.
    """
    if not isinstance(curve, HilbertCurve):
        raise CurveError("pushforward is implemented for plain Hilbert curves")
    avg, aligned = alpha.average_over(curve.n_cells)
    if not aligned:
        warnings.warn("weight breakpoints not aligned with the curve cells; using cell averages", AlignmentWarning)
    out = np.zeros((curve.side,) * curve.d)
    out[tuple(curve.cells.T)] = avg
    return PiecewiseConstantWeight("T", out, level=curve.order), aligned


def change_of_variables_residual(f, curve, n_samples: int) -> float:
    """|int_T f dt - int_I f(c(u)) du|, both by midpoint rules.

    ``f`` maps an (n, d) array of points to n values.  The T-side rule uses the
    curve's level-m cells, the I-side rule ``n_samples`` equal intervals.
    """
    if n_samples < 1 or n_samples & (n_samples - 1):
        raise CurveError("n_samples must be a power of two")
    nodes, w = curve.quadrature()
    lhs = float(np.dot(w, f(nodes)))
    u = (np.arange(n_samples) + 0.5) / n_samples
    rhs = float(np.mean(f(curve.point(u))))
    return abs(lhs - rhs)


def uniform_convergence_gap(d: int, m: int, n_samples: int = 4097) -> float:
    """Sup distance between order-m and order-(m+1) approximants on a t-grid."""
    t = np.linspace(0.0, 1.0, n_samples)
    a = HilbertCurve(d, m).point(t)
    b = HilbertCurve(d, m + 1).point(t)
    return float(np.max(np.linalg.norm(a - b, axis=1)))


def diameter_bound(d: int, m: int) -> float:
    return math.sqrt(d) * 2.0**-m
