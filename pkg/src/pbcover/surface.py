"""Two-dimensional symplectic surfaces in Darboux charts.

A surface is sampled on a rectangular grid of its chart.  Periodic axes use
node-centred samples without the duplicate endpoint; non-periodic axes use
cell-centred samples, so the rectangle rule integrates constants exactly on
every kind of chart.

The sphere is presented in cylindrical (Archimedes) coordinates ``(theta, z)``
where the area form is ``dtheta ^ dz``.  The chart degenerates at the two
poles; samples within ``eps_pole`` of ``|z| = A/(4 pi)`` form the polar band
and are masked out of every bracket.  :meth:`ChartedSurface.atlas` returns a
second chart whose axis is rotated onto the x axis, so the union of the
unmasked regions of the two charts is the whole sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

KINDS = ("plane", "torus", "sphere")
MIN_GRID = 8


class SurfaceError(ValueError):
    pass


class GridMismatchError(SurfaceError):
    pass


class PolarBandError(SurfaceError):
    """A sphere field varies inside the polar exclusion band."""


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < MIN_GRID or self.ny < MIN_GRID:
            raise SurfaceError(f"grid {self.nx}x{self.ny} too coarse (need >= {MIN_GRID})")


@dataclass(frozen=True, eq=False)
class ChartedSurface:
    kind: str
    area: float
    grid: GridSpec
    rect: tuple[float, float, float, float]  # x0, x1, y0, y1
    periodic: tuple[bool, bool]
    eps_pole: float = 0.0
    # sphere only: rotation taking chart unit vectors to world unit vectors
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    @property
    def nx(self) -> int:
        return self.grid.nx

    @property
    def ny(self) -> int:
        return self.grid.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.grid.nx, self.grid.ny)

    @property
    def periods(self) -> tuple[float, float]:
        x0, x1, y0, y1 = self.rect
        return (x1 - x0, y1 - y0)

    @property
    def hx(self) -> float:
        return self.periods[0] / self.grid.nx

    @property
    def hy(self) -> float:
        return self.periods[1] / self.grid.ny

    @property
    def zmax(self) -> float:
        """Half-height of the sphere chart, A/(4 pi)."""
        return self.area / (4.0 * math.pi)

    def axis(self, k: int) -> np.ndarray:
        x0, x1, y0, y1 = self.rect
        lo, n, h = (x0, self.nx, self.hx) if k == 0 else (y0, self.ny, self.hy)
        if self.periodic[k]:
            return lo + h * np.arange(n)
        return lo + h * (np.arange(n) + 0.5)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Chart coordinates of all samples as two (nx, ny) arrays."""
        return np.meshgrid(self.axis(0), self.axis(1), indexing="ij")

    def points(self) -> np.ndarray:
        """Samples as an (nx*ny, 2) array in row-major order."""
        X, Y = self.coords()
        return np.column_stack([X.ravel(), Y.ravel()])

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def valid_mask(self) -> np.ndarray:
        """True away from the polar band; all True off the sphere."""
        if self.kind != "sphere":
            return np.ones(self.shape, dtype=bool)
        _, Z = self.coords()
        return (self.zmax - np.abs(Z)) >= self.eps_pole

    def same_grid(self, other: "ChartedSurface") -> bool:
        return (
            self is other
            or (
                self.kind == other.kind
                and self.grid == other.grid
                and self.rect == other.rect
                and self.area == other.area
                and np.array_equal(self.rotation, other.rotation)
            )
        )

    # -- sphere geometry -------------------------------------------------

    def to_world(self, pts: np.ndarray) -> np.ndarray:
        """Chart points (..., 2) on the sphere to world unit vectors (..., 3)."""
        pts = np.asarray(pts, dtype=float)
        th, z = pts[..., 0], pts[..., 1]
        s = np.clip(z / self.zmax, -1.0, 1.0)
        r = np.sqrt(np.maximum(0.0, 1.0 - s * s))
        v = np.stack([r * np.cos(th), r * np.sin(th), s], axis=-1)
        return v @ self.rotation.T

    def from_world(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float) @ self.rotation
        th = np.mod(np.arctan2(v[..., 1], v[..., 0]), 2 * math.pi)
        z = self.zmax * np.clip(v[..., 2], -1.0, 1.0)
        return np.stack([th, z], axis=-1)

    def world_points(self) -> np.ndarray:
        return self.to_world(self.points())

    def atlas(self) -> list["ChartedSurface"]:
        """Charts whose unmasked regions jointly cover the surface."""
        if self.kind != "sphere":
            return [self]
        # chart z axis -> world x axis
        R = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])
        other = ChartedSurface(
            self.kind, self.area, self.grid, self.rect, self.periodic, self.eps_pole, R @ self.rotation
        )
        return [self, other]

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "area": self.area,
            "nx": self.nx,
            "ny": self.ny,
            "rect": list(self.rect),
            "periodic": list(self.periodic),
            "eps_pole": self.eps_pole,
        }


def make_surface(
    kind: str,
    area: float,
    grid: GridSpec | tuple[int, int],
    eps_pole: float | None = None,
    aspect: float = 1.0,
) -> ChartedSurface:
    """Build a charted surface of total area ``area``.

    Plane and torus charts are ``[0, w] x [0, h]`` with ``w*h = area`` and
    ``w/h = aspect``.  The sphere chart is ``[0, 2 pi) x [-A/4pi, A/4pi]``.
    ``eps_pole`` defaults to four z-cells.
    """
    if kind not in KINDS:
        raise SurfaceError(f"unknown surface kind {kind!r}")
    if not (area > 0 and math.isfinite(area)):
        raise SurfaceError(f"area must be positive, got {area}")
    if not isinstance(grid, GridSpec):
        grid = GridSpec(*grid)
    if kind == "sphere":
        zm = area / (4 * math.pi)
        rect = (0.0, 2 * math.pi, -zm, zm)
        hz = 2 * zm / grid.ny
        if eps_pole is None:
            eps_pole = 4 * hz
        if not (0 < eps_pole < 0.25 * zm):
            raise SurfaceError(f"eps_pole={eps_pole} must be positive and small against z-extent {zm}")
        return ChartedSurface(kind, float(area), grid, rect, (True, False), float(eps_pole))
    w = math.sqrt(area * aspect)
    h = area / w
    periodic = (True, True) if kind == "torus" else (False, False)
    return ChartedSurface(kind, float(area), grid, (0.0, w, 0.0, h), periodic, 0.0)


# -- fields ---------------------------------------------------------------


class ScalarField:
    """Samples of a real function on a surface grid.

    ``grad`` optionally carries derivative samples ``(d/dx, d/dy)`` computed
    by the producer (partitions attach quotient-rule gradients).  When absent
    the gradient is taken by finite differences.
    """

    __slots__ = ("surface", "values", "grad")

    def __init__(self, surface: ChartedSurface, values, grad=None):
        values = np.array(values, dtype=float)
        if values.shape != surface.shape:
            raise GridMismatchError(f"values {values.shape} vs grid {surface.shape}")
        if not np.all(np.isfinite(values)):
            raise SurfaceError("field has non-finite samples")
        values.setflags(write=False)
        if grad is not None:
            gx, gy = (np.array(g, dtype=float) for g in grad)
            if gx.shape != surface.shape or gy.shape != surface.shape:
                raise GridMismatchError("gradient shape mismatch")
            gx.setflags(write=False)
            gy.setflags(write=False)
            grad = (gx, gy)
        self.surface = surface
        self.values = values
        self.grad = grad

    @classmethod
    def from_function(cls, surface: ChartedSurface, fn) -> "ScalarField":
        X, Y = surface.coords()
        return cls(surface, np.broadcast_to(fn(X, Y), surface.shape))

    def gradient(self, order: int = 2) -> tuple[np.ndarray, np.ndarray]:
        if self.grad is not None:
            return self.grad
        return fd_gradient(self.surface, self.values, order)

    def __add__(self, other):
        _check_same(self, other)
        return ScalarField(self.surface, self.values + other.values)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            _check_same(self, other)
            return ScalarField(self.surface, self.values * other.values)
        return ScalarField(self.surface, self.values * float(other))

    __rmul__ = __mul__

    def to_csv(self, path) -> None:
        """Row-major dump: header comments, then ``x,y,value`` rows."""
        s = self.surface
        X, Y = s.coords()
        with open(path, "w") as fh:
            fh.write(f"# nx={s.nx} ny={s.ny} rect={','.join(repr(v) for v in s.rect)}\n")
            fh.write("x,y,value\n")
            for x, y, v in zip(X.ravel(), Y.ravel(), self.values.ravel()):
                fh.write(f"{x:.17g},{y:.17g},{v:.17g}\n")


def _check_same(f: ScalarField, g: ScalarField) -> None:
    if not f.surface.same_grid(g.surface):
        raise GridMismatchError("fields live on different surfaces or grids")


def _d_periodic(a: np.ndarray, h: float, axis: int, order: int) -> np.ndarray:
    if order == 2:
        return (np.roll(a, -1, axis) - np.roll(a, 1, axis)) / (2 * h)
    return (
        -np.roll(a, -2, axis) + 8 * np.roll(a, -1, axis) - 8 * np.roll(a, 1, axis) + np.roll(a, 2, axis)
    ) / (12 * h)


def _d_open(a: np.ndarray, h: float, axis: int, order: int) -> np.ndarray:
    a = np.moveaxis(a, axis, 0)
    d = np.empty_like(a)
    if order == 2:
        d[1:-1] = (a[2:] - a[:-2]) / (2 * h)
        d[0] = (-3 * a[0] + 4 * a[1] - a[2]) / (2 * h)
        d[-1] = (3 * a[-1] - 4 * a[-2] + a[-3]) / (2 * h)
    else:
        d[2:-2] = (-a[4:] + 8 * a[3:-1] - 8 * a[1:-3] + a[:-4]) / (12 * h)
        d[0] = (-25 * a[0] + 48 * a[1] - 36 * a[2] + 16 * a[3] - 3 * a[4]) / (12 * h)
        d[1] = (-3 * a[0] - 10 * a[1] + 18 * a[2] - 6 * a[3] + a[4]) / (12 * h)
        d[-1] = (25 * a[-1] - 48 * a[-2] + 36 * a[-3] - 16 * a[-4] + 3 * a[-5]) / (12 * h)
        d[-2] = (3 * a[-1] + 10 * a[-2] - 18 * a[-3] + 6 * a[-4] - a[-5]) / (12 * h)
    return np.moveaxis(d, 0, axis)


def fd_gradient(surface: ChartedSurface, values: np.ndarray, order: int = 2):
    """Central differences along the two chart axes of the trailing dims.

    ``values`` may carry leading batch dimensions; the last two axes are the
    grid.  Periodic axes wrap, open axes use one-sided stencils of the same
    order at the ends.
    """
    if order not in (2, 4):
        raise ValueError("finite-difference order must be 2 or 4")
    out = []
    for k, h in ((0, surface.hx), (1, surface.hy)):
        axis = values.ndim - 2 + k
        fn = _d_periodic if surface.periodic[k] else _d_open
        out.append(fn(values, h, axis, order))
    return out[0], out[1]


def poisson_bracket(
    f: ScalarField, g: ScalarField, order: int = 2, allow_polar: bool = False
) -> ScalarField:
    """{f, g} = f_x g_y - f_y g_x on the grid.

    On the sphere the polar band is masked to zero.  Unless ``allow_polar``
    is set (the caller evaluates the band in another chart), a field that is
    not constant inside the band raises :class:`PolarBandError`.
    """
    _check_same(f, g)
    s = f.surface
    fx, fy = f.gradient(order)
    gx, gy = g.gradient(order)
    pb = fx * gy - fy * gx
    if s.kind == "sphere":
        band = ~s.valid_mask()
        if not allow_polar:
            for dx, dy in ((fx, fy), (gx, gy)):
                if band.any() and max(np.abs(dx[band]).max(), np.abs(dy[band]).max()) > 1e-9:
                    raise PolarBandError("field varies inside the polar exclusion band")
        pb = np.where(band, 0.0, pb)
    return ScalarField(s, pb)


def sup_norm(f: ScalarField) -> float:
    return float(np.max(np.abs(f.values)))


def integrate(f: ScalarField) -> float:
    """Rectangle rule against the flat area form of the chart."""
    return float(np.sum(f.values) * f.surface.cell_area)


def displacement_energy_cap(cap_area: float, total_area: float) -> float:
    """Hofer displacement energy of an open cap of the round sphere."""
    if not (0 < cap_area < total_area):
        raise SurfaceError(f"cap area {cap_area} must lie in (0, {total_area})")
    return float(cap_area) if cap_area < total_area / 2 else math.inf
