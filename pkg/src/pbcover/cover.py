"""Symplectic disk embeddings, discrete and continuous covers, bicovers.

A disk embedding maps the open flat disk of capacity ``(1+eta)c`` (the
collar) into a surface.  Covers use the disk of capacity ``c`` and
partitions live on the inner disk of capacity ``(1-eta)c``.  Every
embedding exposes ``local_coords``, the inverse of the embedding on its
collar, returning NaN for points outside the collar.

Two placements are exact:

* translated disks on the torus and the plane, ``u -> u + centre``;
* caps on the sphere, where flat polar coordinates ``(rho, phi)`` map to the
  cap frame by ``s = 1 - rho^2 / (2 zmax)``.  Pulling back ``dtheta ^ dz``
  gives ``rho drho ^ dphi``.

A third placement, the band, embeds a flat annulus of width ``w`` around
a closed geodesic of the torus.  Two disks can never cover a torus, but two
bands can, so two-set torus covers use bands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .partition import Partition
from .surface import ChartedSurface

DEFAULT_ETA = 0.1


class CoverError(ValueError):
    pass


class EmbeddingError(CoverError):
    pass


def _wrap(d: np.ndarray, period: float) -> np.ndarray:
    return d - period * np.round(d / period)


class DiskEmbedding:
    """Base class.  ``capacity`` is the area of the covering disk."""

    surface: ChartedSurface
    capacity: float
    eta: float
    shape = "disk"
    offset_dim = 2

    @property
    def radius(self) -> float:
        return math.sqrt(self.capacity / math.pi)

    @property
    def inner_extent(self) -> float:
        return math.sqrt((1 - self.eta) * self.capacity / math.pi)

    @property
    def collar_extent(self) -> float:
        return math.sqrt((1 + self.eta) * self.capacity / math.pi)

    def zero_offset(self) -> tuple:
        return (0.0,) * self.offset_dim

    def profile_distance(self, u: np.ndarray, offset) -> np.ndarray:
        """Flat distance from the (offset) bump centre."""
        return np.hypot(u[:, 0] - offset[0], u[:, 1] - offset[1])

    def contains(self, pts: np.ndarray, surface: ChartedSurface | None = None, extent: float | None = None) -> np.ndarray:
        extent = self.radius if extent is None else extent
        u = self.local_coords(pts, surface or self.surface)
        d = self.profile_distance(u, self.zero_offset())
        return np.isfinite(d) & (d < extent)

    def indicator(self, surface: ChartedSurface | None = None, extent: float | None = None) -> np.ndarray:
        surface = surface or self.surface
        return self.contains(surface.points(), surface, extent).reshape(surface.shape)

    def chart_area(self, surface: ChartedSurface | None = None) -> float:
        """Grid-count area of the image (masked band excluded on spheres)."""
        surface = surface or self.surface
        return float(self.indicator(surface).sum() * surface.cell_area)


@dataclass(frozen=True, eq=False)
class TranslatedDisk(DiskEmbedding):
    surface: ChartedSurface
    center: tuple[float, float]
    capacity: float
    eta: float = DEFAULT_ETA

    def local_coords(self, pts, surface=None):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        d = pts - np.asarray(self.center)
        s = self.surface
        for k in range(2):
            if s.periodic[k]:
                d[:, k] = _wrap(d[:, k], s.periods[k])
        out = np.where(np.hypot(d[:, 0], d[:, 1])[:, None] < self.collar_extent, d, np.nan)
        return out

    def forward(self, u):
        u = np.asarray(u, dtype=float).reshape(-1, 2)
        p = u + np.asarray(self.center)
        x0, _, y0, _ = self.surface.rect
        for k, lo in ((0, x0), (1, y0)):
            if self.surface.periodic[k]:
                p[:, k] = lo + np.mod(p[:, k] - lo, self.surface.periods[k])
        return p

    def moved(self, center) -> "TranslatedDisk":
        return TranslatedDisk(self.surface, tuple(float(c) for c in center), self.capacity, self.eta)

    def with_capacity(self, c) -> "TranslatedDisk":
        return translated_disk(self.surface, self.center, c, self.eta)

    def contains_image(self, other: "DiskEmbedding", extent: float) -> bool:
        """Whether the flat disk of radius ``extent`` of ``other`` lies in this image."""
        if not isinstance(other, TranslatedDisk):
            return False
        d = np.asarray(other.center) - np.asarray(self.center)
        for k in range(2):
            if self.surface.periodic[k]:
                d[k] = _wrap(d[k], self.surface.periods[k])
        return bool(math.hypot(*d) + extent < self.radius)

    def describe(self) -> dict:
        return {"type": "translated_disk", "center": list(self.center), "capacity": self.capacity, "eta": self.eta}


def translated_disk(surface: ChartedSurface, center, c: float, eta: float = DEFAULT_ETA) -> TranslatedDisk:
    if surface.kind not in ("torus", "plane"):
        raise EmbeddingError("translated disks live on the torus or the plane")
    if not (0 < eta < 1):
        raise EmbeddingError("eta must lie in (0, 1)")
    if not (0 < c < surface.area):
        raise EmbeddingError(f"capacity {c} must lie in (0, {surface.area})")
    emb = TranslatedDisk(surface, (float(center[0]), float(center[1])), float(c), float(eta))
    r = emb.collar_extent
    x0, x1, y0, y1 = surface.rect
    for k, (lo, hi) in enumerate(((x0, x1), (y0, y1))):
        if surface.periodic[k]:
            if 2 * r >= hi - lo:
                raise EmbeddingError(f"capacity {c} too large: the collar wraps around the torus")
        elif emb.center[k] - r < lo or emb.center[k] + r > hi:
            raise EmbeddingError(f"capacity {c} too large for the chart at centre {emb.center}")
    return emb


def _frame(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(ref, axis)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    return e1, e2


@dataclass(frozen=True, eq=False)
class CapEmbedding(DiskEmbedding):
    surface: ChartedSurface
    axis: np.ndarray  # world unit vector of the cap centre
    capacity: float
    eta: float = DEFAULT_ETA

    @property
    def center(self) -> tuple[float, float]:
        return tuple(float(v) for v in self.surface.from_world(self.axis))

    def _s(self, rho):
        return 1.0 - rho**2 / (2 * self.surface.zmax)

    @property
    def angular_radius(self) -> float:
        return math.acos(max(-1.0, self._s(self.radius)))

    def local_coords(self, pts, surface=None):
        surface = surface or self.surface
        w = surface.to_world(np.asarray(pts, dtype=float).reshape(-1, 2))
        e1, e2 = _frame(self.axis)
        s = np.clip(w @ self.axis, -1.0, 1.0)
        rho = np.sqrt(2 * self.surface.zmax * (1.0 - s))
        phi = np.arctan2(w @ e2, w @ e1)
        u = np.column_stack([rho * np.cos(phi), rho * np.sin(phi)])
        return np.where((rho < self.collar_extent)[:, None], u, np.nan)

    def forward(self, u, surface=None):
        surface = surface or self.surface
        u = np.asarray(u, dtype=float).reshape(-1, 2)
        rho = np.hypot(u[:, 0], u[:, 1])
        phi = np.arctan2(u[:, 1], u[:, 0])
        s = self._s(rho)
        r = np.sqrt(np.maximum(0.0, 1 - s * s))
        e1, e2 = _frame(self.axis)
        w = (r * np.cos(phi))[:, None] * e1 + (r * np.sin(phi))[:, None] * e2 + s[:, None] * self.axis
        return surface.from_world(w)

    def moved(self, center) -> "CapEmbedding":
        return cap_embedding(self.surface, center, self.capacity, self.eta)

    def with_capacity(self, c) -> "CapEmbedding":
        return CapEmbedding(self.surface, self.axis, float(c), self.eta)

    def contains_image(self, other: "DiskEmbedding", extent: float) -> bool:
        if not isinstance(other, CapEmbedding):
            return False
        gap = math.acos(float(np.clip(self.axis @ other.axis, -1, 1)))
        ang = math.acos(max(-1.0, other._s(extent)))
        return gap + ang < self.angular_radius

    def describe(self) -> dict:
        return {"type": "cap", "center": list(self.center), "capacity": self.capacity, "eta": self.eta}


def cap_embedding(sphere: ChartedSurface, center, c: float, eta: float = DEFAULT_ETA) -> CapEmbedding:
    """Cap of area ``c`` centred at the chart point ``center = (theta, z)``.

    Caps may contain the poles of the chart: brackets are evaluated on the
    two-chart atlas, so nothing is lost inside the polar band.
    """
    if sphere.kind != "sphere":
        raise EmbeddingError("cap embeddings live on the sphere")
    if not (0 < eta < 1):
        raise EmbeddingError("eta must lie in (0, 1)")
    if not (0 < c < sphere.area):
        raise EmbeddingError(f"capacity {c} must lie in (0, {sphere.area})")
    axis = sphere.to_world(np.asarray(center, dtype=float))
    emb = CapEmbedding(sphere, axis / np.linalg.norm(axis), float(c), float(eta))
    if (1 + eta) * c >= sphere.area:
        raise EmbeddingError("collar of the cap would cover the whole sphere")
    return emb


def cap_at_axis(sphere: ChartedSurface, axis, c: float, eta: float = DEFAULT_ETA) -> CapEmbedding:
    axis = np.asarray(axis, dtype=float)
    th_z = sphere.from_world(axis / np.linalg.norm(axis))
    return cap_embedding(sphere, th_z, c, eta)


@dataclass(frozen=True, eq=False)
class BandEmbedding(DiskEmbedding):
    """Annulus ``S^1 x (-w/2, w/2)`` around a horizontal or vertical circle.

    ``offset`` for bumps is one transverse coordinate; bump profiles depend
    on the transverse distance only.
    """

    surface: ChartedSurface
    direction: str  # "h": along x at height `level`; "v": along y
    level: float
    capacity: float
    eta: float = DEFAULT_ETA
    shape = "band"
    offset_dim = 1

    @property
    def length(self) -> float:
        return self.surface.periods[0 if self.direction == "h" else 1]

    @property
    def radius(self) -> float:
        return 0.5 * self.capacity / self.length

    @property
    def inner_extent(self) -> float:
        return 0.5 * (1 - self.eta) * self.capacity / self.length

    @property
    def collar_extent(self) -> float:
        return 0.5 * (1 + self.eta) * self.capacity / self.length

    @property
    def center(self) -> tuple[float, float]:
        return (0.0, self.level) if self.direction == "h" else (self.level, 0.0)

    def local_coords(self, pts, surface=None):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        a, b = (0, 1) if self.direction == "h" else (1, 0)
        along = pts[:, a] - self.surface.rect[2 * a]
        trans = _wrap(pts[:, b] - self.level, self.surface.periods[b])
        u = np.column_stack([along, trans]) if self.direction == "h" else np.column_stack([trans, along])
        # orientation: (along, trans) for "h" and (trans, along) for "v" both
        # pull dx ^ dy back to the flat form
        return np.where((np.abs(trans) < self.collar_extent)[:, None], u, np.nan)

    def forward(self, u):
        u = np.asarray(u, dtype=float).reshape(-1, 2)
        x0, _, y0, _ = self.surface.rect
        if self.direction == "h":
            p = np.column_stack([x0 + u[:, 0], self.level + u[:, 1]])
        else:
            p = np.column_stack([self.level + u[:, 0], y0 + u[:, 1]])
        lo = np.array([x0, y0])
        return lo + np.mod(p - lo, np.asarray(self.surface.periods))

    def profile_distance(self, u, offset):
        k = 1 if self.direction == "h" else 0
        return np.abs(u[:, k] - offset[0])

    def moved(self, level) -> "BandEmbedding":
        return band_embedding(self.surface, self.direction, float(level), self.capacity, self.eta)

    def with_capacity(self, c) -> "BandEmbedding":
        return band_embedding(self.surface, self.direction, self.level, c, self.eta)

    def contains_image(self, other, extent) -> bool:
        if not isinstance(other, BandEmbedding) or other.direction != self.direction:
            return False
        p = self.surface.periods[1 if self.direction == "h" else 0]
        return abs(_wrap(other.level - self.level, p)) + extent < self.radius

    def describe(self) -> dict:
        return {"type": "band", "direction": self.direction, "level": self.level,
                "capacity": self.capacity, "eta": self.eta}


def band_embedding(torus: ChartedSurface, direction: str, level: float, c: float,
                   eta: float = DEFAULT_ETA) -> BandEmbedding:
    if torus.kind != "torus":
        raise EmbeddingError("band embeddings need a torus")
    if direction not in ("h", "v"):
        raise EmbeddingError("band direction must be 'h' or 'v'")
    if not (0 < c < torus.area):
        raise EmbeddingError(f"capacity {c} must lie in (0, {torus.area})")
    emb = BandEmbedding(torus, direction, float(level), float(c), float(eta))
    width = torus.periods[1 if direction == "h" else 0]
    if 2 * emb.collar_extent >= width:
        raise EmbeddingError("band collar wraps around the torus")
    return emb


def symplectic_residual(emb: DiskEmbedding, n: int = 100, seed: int = 0, h: float = 1e-6) -> float:
    """max |det D(forward) - 1| at random interior points of the disk.

    Central differences of the forward map, chart coordinates unwrapped.
    """
    if not hasattr(emb, "forward"):
        raise EmbeddingError("embedding has no explicit forward map")
    rng = np.random.default_rng(seed)
    r = emb.radius * np.sqrt(rng.uniform(0.0, 0.9, n))
    a = rng.uniform(0, 2 * math.pi, n)
    u = np.column_stack([r * np.cos(a), r * np.sin(a)])
    periods = emb.surface.periods
    cols = []
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        d = emb.forward(u + e) - emb.forward(u - e)
        if emb.surface.periodic[0]:
            d[:, 0] = _wrap(d[:, 0], periods[0])
        if emb.surface.periodic[1]:
            d[:, 1] = _wrap(d[:, 1], periods[1])
        cols.append(d / (2 * h))
    det = cols[0][:, 0] * cols[1][:, 1] - cols[0][:, 1] * cols[1][:, 0]
    return float(np.max(np.abs(det - 1.0)))


def embedding_from_dict(surface: ChartedSurface, d: dict) -> DiskEmbedding:
    kind = d.get("type", "cap" if surface.kind == "sphere" else "translated_disk")
    eta = float(d.get("eta", DEFAULT_ETA))
    if kind == "band":
        return band_embedding(surface, d["direction"], d["level"], d["capacity"], eta)
    if kind == "cap":
        return cap_embedding(surface, d["center"], d["capacity"], eta)
    return translated_disk(surface, d["center"], d["capacity"], eta)


# -- covers ----------------------------------------------------------------


def _uncovered(surface: ChartedSurface, embeddings) -> np.ndarray:
    """Chart points (over the whole atlas on spheres) outside every image."""
    out = []
    for chart in surface.atlas():
        pts = chart.points()
        if chart.kind == "sphere":
            pts = pts[chart.valid_mask().ravel()]
        hit = np.zeros(len(pts), dtype=bool)
        for e in embeddings:
            hit |= e.contains(pts, chart)
        miss = pts[~hit]
        if chart is not surface:
            miss = surface.from_world(chart.to_world(miss))
        out.append(miss)
    return np.concatenate(out) if out else np.zeros((0, 2))


def _cover_error(miss: np.ndarray) -> CoverError:
    head = ", ".join(f"({x:.4g}, {y:.4g})" for x, y in miss[:5])
    return CoverError(f"images miss {len(miss)} grid points, e.g. {head}")


@dataclass(eq=False)
class DiscreteCover:
    surface: ChartedSurface
    embeddings: list
    kind: str = "discrete"

    def __post_init__(self):
        if not self.embeddings:
            raise CoverError("a cover needs at least one set")
        for e in self.embeddings:
            if e.surface is not self.surface and not e.surface.same_grid(self.surface):
                raise CoverError("embeddings live on different surfaces")
        miss = _uncovered(self.surface, self.embeddings)
        if len(miss):
            raise _cover_error(miss)

    @property
    def n(self) -> int:
        return len(self.embeddings)

    def quadrature_weights(self) -> np.ndarray:
        return np.ones(self.n)

    def describe(self) -> dict:
        return {"kind": "discrete", "surface": self.surface.describe(),
                "sets": [e.describe() for e in self.embeddings]}


@dataclass(eq=False)
class ContinuousCover:
    """Per-sample embeddings on the midpoint t-grid ``t_k = (k + 1/2)/M_t``."""

    surface: ChartedSurface
    embeddings: list
    step_bound: float | None = None
    kind: str = "continuous"
    max_step: float = field(init=False, default=0.0)

    def __post_init__(self):
        if not self.embeddings:
            raise CoverError("a cover needs at least one sample")
        miss = _uncovered(self.surface, self.embeddings)
        if len(miss):
            raise _cover_error(miss)
        steps = [_center_distance(a, b) for a, b in zip(self.embeddings, self.embeddings[1:])]
        self.max_step = max(steps, default=0.0)
        bound = self.step_bound if self.step_bound is not None else self.embeddings[0].radius
        if self.max_step > bound + 1e-12:
            raise CoverError(f"consecutive centres jump {self.max_step:.4g} > step bound {bound:.4g}")

    @property
    def n_t(self) -> int:
        return len(self.embeddings)

    @property
    def t_grid(self) -> np.ndarray:
        return (np.arange(self.n_t) + 0.5) / self.n_t

    def quadrature_weights(self) -> np.ndarray:
        return np.full(self.n_t, 1.0 / self.n_t)

    def describe(self) -> dict:
        return {"kind": "continuous", "surface": self.surface.describe(), "M_t": self.n_t,
                "samples": [e.describe() for e in self.embeddings]}


def _center_distance(a: DiskEmbedding, b: DiskEmbedding) -> float:
    if isinstance(a, CapEmbedding):
        return math.acos(float(np.clip(a.axis @ b.axis, -1, 1))) * math.sqrt(a.surface.zmax)
    ca, cb = np.asarray(a.center), np.asarray(b.center)
    d = cb - ca
    s = a.surface
    for k in range(2):
        if s.periodic[k]:
            d[k] = _wrap(d[k], s.periods[k])
    return float(math.hypot(*d))


def interpolate_centers(surface: ChartedSurface, waypoints, t: np.ndarray, times=None) -> np.ndarray:
    """Piecewise-linear centre path through ``waypoints`` evaluated at ``t``.

    Torus: shortest representative of each leg.  Sphere: great-circle legs.
    ``times`` default to a uniform spacing over [0, 1].
    """
    W = np.asarray(waypoints, dtype=float)
    m = len(W)
    if m == 1:
        return np.repeat(W, len(t), axis=0)
    times = np.linspace(0, 1, m) if times is None else np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise CoverError("waypoint times must increase")
    leg = np.clip(np.searchsorted(times, t, side="right") - 1, 0, m - 2)
    lam = ((t - times[leg]) / (times[leg + 1] - times[leg]))[:, None]
    if surface.kind == "sphere":
        A = surface.to_world(W[leg])
        B = surface.to_world(W[leg + 1])
        cosg = np.clip(np.sum(A * B, axis=1), -1, 1)
        g = np.arccos(cosg)[:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            sa = np.where(g > 1e-12, np.sin((1 - lam) * g) / np.sin(g), 1 - lam)
            sb = np.where(g > 1e-12, np.sin(lam * g) / np.sin(g), lam)
        P = sa * A + sb * B
        return surface.from_world(P / np.linalg.norm(P, axis=1, keepdims=True))
    a, b = W[leg], W[leg + 1]
    d = b - a
    for k in range(2):
        if surface.periodic[k]:
            d[:, k] = _wrap(d[:, k], surface.periods[k])
    p = a + lam * d
    x0, _, y0, _ = surface.rect
    for k, lo in ((0, x0), (1, y0)):
        if surface.periodic[k]:
            p[:, k] = lo + np.mod(p[:, k] - lo, surface.periods[k])
    return p


def _embed_at(surface, center, c, eta):
    if surface.kind == "sphere":
        return cap_embedding(surface, center, c, eta)
    return translated_disk(surface, center, c, eta)


def make_continuous_cover(surface: ChartedSurface, center_path, c: float, M_t: int,
                          eta: float = DEFAULT_ETA, times=None, step_bound=None) -> ContinuousCover:
    """Sample a centre path on the midpoint t-grid and certify the cover.

    ``center_path`` is either a callable ``t -> (M, 2)`` centres or a list of
    waypoints interpolated piecewise linearly.
    """
    if M_t < 1:
        raise CoverError("M_t must be positive")
    if not (0 < c):
        raise CoverError("capacity must be positive")
    t = (np.arange(M_t) + 0.5) / M_t
    if callable(center_path):
        C = np.asarray(center_path(t), dtype=float).reshape(M_t, 2)
    else:
        C = interpolate_centers(surface, center_path, t, times)
    if c >= surface.area and surface.kind == "plane":
        # a disk of capacity >= A swallows the chart: use the chart itself
        return ContinuousCover(surface, [WholeChart(surface, float(c), eta)] * M_t, step_bound)
    embs = [_embed_at(surface, cc, c, eta) for cc in C]
    return ContinuousCover(surface, embs, step_bound)


@dataclass(frozen=True, eq=False)
class WholeChart(DiskEmbedding):
    """A disk so large that its image is the whole (plane) chart."""

    surface: ChartedSurface
    capacity: float
    eta: float = DEFAULT_ETA

    @property
    def inner_extent(self) -> float:
        return math.inf  # bumps on it are constant

    @property
    def collar_extent(self) -> float:
        return math.inf

    @property
    def center(self):
        x0, x1, y0, y1 = self.surface.rect
        return (0.5 * (x0 + x1), 0.5 * (y0 + y1))

    def local_coords(self, pts, surface=None):
        return np.asarray(pts, dtype=float).reshape(-1, 2) - np.asarray(self.center)

    def contains(self, pts, surface=None, extent=None):
        return np.ones(len(np.asarray(pts).reshape(-1, 2)), dtype=bool)

    def contains_image(self, other, extent):
        return True

    def describe(self):
        return {"type": "whole_chart", "capacity": self.capacity}


def boustrophedon_path(surface: ChartedSurface, rows: int) -> tuple[list, list]:
    """Waypoints and times sweeping ``rows`` horizontal circles of a torus.

    Row ``i`` sits at height ``(i + 1/2)/rows`` of the chart.  The path runs
    once around each row (alternating direction) and climbs to the next one,
    at unit speed so that consecutive t-samples move by the same distance.
    """
    x0, x1, y0, y1 = surface.rect
    w, h = x1 - x0, y1 - y0
    pts = []
    for i in range(rows):
        y = y0 + (i + 0.5) * h / rows
        xs = [x0, x0 + w / 2, x0 + w] if i % 2 == 0 else [x0 + w, x0 + w / 2, x0]
        # half-circle waypoints keep every leg shorter than half a period
        pts += [(x, y) for x in xs]
    seg = [math.hypot(*np.subtract(b, a)) for a, b in zip(pts, pts[1:])]
    ts = np.concatenate([[0.0], np.cumsum(seg)])
    return pts, list(ts / ts[-1])


# -- Lebesgue number and conversions -----------------------------------------


def inclusion_matrix(cover: ContinuousCover, partition: Partition) -> np.ndarray:
    """allowed[s, j]: support of the s-th stored slice lies in G_{t_j}(U).

    Geometric test for disks with known specs, confirmed on the grid.
    Slices without a stored support spec fall back to the grid test alone.
    """
    surf = partition.surface
    pts = surf.points()
    n = partition.n
    allowed = np.zeros((n, cover.n_t), dtype=bool)
    for i in range(n):
        pos = partition.fields[i].ravel() > 0
        if not pos.any():
            allowed[i] = True
            continue
        spec = partition.specs[i] if partition.specs else None
        own = partition.embeddings[i] if partition.embeddings else None
        P = pts[pos]
        rim = None
        if spec is not None and spec.axes is not None and hasattr(own, "forward"):
            rim = own.forward(spec.boundary())
        for j, e in enumerate(cover.embeddings):
            if spec is not None and spec.axes is None and own is not None:
                allowed[i, j] = e.contains_image(own, spec.extent())
            elif rim is not None:
                # convex support in flat coordinates: its rim decides
                allowed[i, j] = bool(e.contains(rim, surf).all())
            else:
                allowed[i, j] = bool(e.contains(P, surf).all())
    return allowed


def max_block(cover: ContinuousCover, partition: Partition) -> int:
    """Largest L such that every run of L consecutive t-cells shares an allowed j."""
    allowed = np.ones((cover.n_t, cover.n_t), dtype=bool)
    allowed[partition.t_index] = inclusion_matrix(cover, partition)
    run = allowed.copy()  # run[s] = AND of rows s .. s+L-1
    best = 0
    for L in range(1, cover.n_t + 1):
        if L > 1:
            run = run[:-1] & allowed[L - 1:]
        if not run.any(axis=1).all():
            break
        best = L
    return best


def lebesgue_number(cover: ContinuousCover, partition: Partition) -> float:
    return max_block(cover, partition) / cover.n_t


def coarse_grain(cover: ContinuousCover, partition: Partition, N: int):
    """Discretize a continuous partition into ``N`` t-blocks.

    Block ``V_k`` is ``M_t/N`` consecutive t-cells.  Every block is assigned a
    sample ``r(k)`` whose image contains the supports of all its slices; the
    discrete cover consists of the distinct assigned embeddings, and

        F'_j = sum_{k: r(k) = j} sum_{s in V_k} w_s F_s.

    Returns ``(DiscreteCover, Partition, r)`` with ``r[k]`` indexing the
    discrete sets.
    """
    if partition.kind != "continuous" or partition.n_t != cover.n_t:
        raise CoverError("coarse_grain needs a continuous partition on the cover's t-grid")
    M = cover.n_t
    if N < 1 or M % N:
        raise CoverError(f"N={N} must divide M_t={M}")
    B = M // N
    allowed_stored = inclusion_matrix(cover, partition)
    allowed = np.ones((M, M), dtype=bool)
    allowed[partition.t_index] = allowed_stored
    choice = np.empty(N, dtype=int)
    for k in range(N):
        common = np.logical_and.reduce(allowed[k * B:(k + 1) * B], axis=0)
        cand = np.flatnonzero(common)
        if cand.size == 0:
            raise CoverError(f"N={N} too small: block {k} has no common embedding")
        mid = k * B + B // 2
        choice[k] = cand[np.argmin(np.abs(cand - mid))]
    used = list(dict.fromkeys(choice.tolist()))
    r = np.array([used.index(j) for j in choice])
    block = partition.t_index // B
    shape = (len(used),) + partition.surface.shape
    F, GX, GY = np.zeros(shape), np.zeros(shape), np.zeros(shape)
    for i in range(partition.n):
        j = r[block[i]]
        w = partition.weights[i]
        F[j] += w * partition.fields[i]
        GX[j] += w * partition.gx[i]
        GY[j] += w * partition.gy[i]
    embs = [cover.embeddings[j] for j in used]
    dcover = DiscreteCover(cover.surface, embs)
    # grid certificate of the chosen assignment
    pts = partition.surface.points()
    for i in range(partition.n):
        pos = partition.fields[i].ravel() > 0
        if pos.any() and not embs[r[block[i]]].contains(pts[pos], partition.surface).all():
            raise CoverError("assigned embedding does not contain a slice support")
    dpart = Partition(partition.surface, F, GX, GY, np.ones(len(used)), "discrete", len(used),
                      np.arange(len(used)), embs, None, dcover,
                      {"op": "coarse_grain", "N": N, "source": partition.token, "block": B})
    C = np.zeros((len(used), partition.n))
    C[r[block], np.arange(partition.n)] = partition.weights
    dpart.parent = (partition, C)
    return dcover, dpart, r


def continuous_from_discrete(cover: DiscreteCover, partition: Partition, M_t: int | None = None,
                             path=None):
    """Spread a discrete partition over I on windows around ``k/(n+1)``.

    The k-th set (1-based) is held constant on the t-window of half-width
    ``1/(3(n+1))`` around ``k/(n+1)``, where the slice carries
    ``(3/2)(n+1) F'_k``.  Between windows the centre moves piecewise linearly
    (or along ``path``, a callable ``t -> centres`` that must pass through the
    discrete centres on the windows).  ``M_t`` must be a multiple of
    ``3(n+1)``.
    """
    if partition.kind != "discrete":
        raise CoverError("continuous_from_discrete needs a discrete partition")
    n = cover.n
    unit = 3 * (n + 1)
    M_t = 2 * unit if M_t is None else M_t
    if M_t % unit:
        raise CoverError(f"M_t={M_t} must be a multiple of 3(n+1)={unit}")
    q = M_t // unit
    t = (np.arange(M_t) + 0.5) / M_t
    base = cover.embeddings
    # window index (1-based) of each t-cell, 0 between windows
    win = np.zeros(M_t, dtype=int)
    for k in range(1, n + 1):
        win[(3 * k - 1) * q:(3 * k + 1) * q] = k
    # the set that governs a cell between windows: the previous window
    prev = np.maximum.accumulate(win)
    prev[prev == 0] = 1
    bands = isinstance(base[0], BandEmbedding)
    if path is not None:
        centers = np.asarray(path(t), dtype=float).reshape(M_t, 2)
    elif not bands:
        wp, times = [base[0].center], [0.0]
        for k in range(1, n + 1):
            wp += [base[k - 1].center] * 2
            times += [(3 * k - 1) / unit, (3 * k + 1) / unit]
        wp.append(base[-1].center)
        times.append(1.0)
        centers = interpolate_centers(cover.surface, wp, t, times)
    embs = []
    for s in range(M_t):
        if win[s]:
            e = base[win[s] - 1]
            if path is not None and not bands and _center_distance(e.moved(centers[s]), e) > 1e-9:
                raise CoverError("path does not interpolate the discrete embeddings")
            embs.append(e)
        elif bands:
            # bands of one direction slide their level between windows
            a, b = base[prev[s] - 1], base[min(prev[s], n - 1)]
            t0, t1 = (3 * prev[s] + 1) / unit, (3 * prev[s] + 2) / unit
            lam = float(np.clip((t[s] - t0) / (t1 - t0), 0, 1)) if b is not a else 0.0
            if b.direction != a.direction:
                embs.append(a if lam < 0.5 else b)
            else:
                d = _wrap(b.level - a.level, cover.surface.periods[1 if a.direction == "h" else 0])
                embs.append(a.moved(a.level + lam * d))
        else:
            embs.append(base[prev[s] - 1].moved(centers[s]))
    ccover = ContinuousCover(cover.surface, embs, step_bound=math.inf)
    factor = 1.5 * (n + 1)
    tix = np.flatnonzero(win)
    sets = win[tix] - 1
    cpart = Partition(partition.surface, factor * partition.fields[sets], factor * partition.gx[sets],
                      factor * partition.gy[sets], np.full(len(tix), 1.0 / M_t), "continuous", M_t, tix,
                      [base[j] for j in sets], [partition.specs[j] for j in sets] if partition.specs else None,
                      ccover, {"op": "continuous_from_discrete", "source": partition.token, "n": n, "q": q})
    C = np.zeros((len(tix), n))
    C[np.arange(len(tix)), sets] = factor
    cpart.parent = (partition, C)
    return ccover, cpart


# -- bicovers --------------------------------------------------------------


def quartic_profile(R: int) -> np.ndarray:
    """Quartic bump on R midpoint rows of [-1, 1], normalized to mean 1."""
    x = -1 + (np.arange(R) + 0.5) * 2 / R
    rho = (1 - x * x) ** 2
    return rho / rho.mean()


@dataclass(eq=False)
class Bicover:
    """A T-family of embeddings built from G_T, a disk D and a slab.

    T = [0,1]^2 carries an ``n_side x n_side`` grid of midpoint cells.  The
    slab is a block of ``n_i`` columns by ``len(rho)`` rows of T-cells inside
    D; slab column ``k`` carries the I-sample ``k`` of ``G_I`` and row ``i``
    the fibre weight ``rho_i``.  Outside D the family is ``G_T o q``; in the
    annulus between slab and boundary of D it is interpolated.
    """

    g_T: object  # callable: (m, 2) T-points -> (m, 2) centres
    g_I: ContinuousCover
    disk_center: tuple[float, float]
    disk_radius: float
    n_side: int
    slab_col0: int
    slab_row0: int
    rho: np.ndarray
    q: object  # callable T -> T
    conditions: dict = field(default_factory=dict)

    @property
    def n_i(self) -> int:
        return self.g_I.n_t

    @property
    def cell_weight(self) -> float:
        return 1.0 / self.n_side**2

    @property
    def slab_volume(self) -> float:
        return self.n_i * len(self.rho) * self.cell_weight

    def slab_cells(self):
        return (np.arange(self.slab_row0, self.slab_row0 + len(self.rho)),
                np.arange(self.slab_col0, self.slab_col0 + self.n_i))

    def t_points(self) -> np.ndarray:
        """T-cell midpoints, index ``row * n_side + col``, as (x, y) = (col, row)."""
        c = (np.arange(self.n_side) + 0.5) / self.n_side
        Y, X = np.meshgrid(c, c, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    def fiber_mass(self) -> float:
        """V_I^{-1} times the T-integral of the fibre profile over one column."""
        return float(np.sum(self.rho) * self.cell_weight * self.n_i / self.slab_volume)

    def slab_mask(self) -> np.ndarray:
        rows, cols = self.slab_cells()
        m = np.zeros((self.n_side, self.n_side), dtype=bool)
        m[np.ix_(rows, cols)] = True
        return m.ravel()

    def outside_mask(self) -> np.ndarray:
        p = self.t_points()
        return np.hypot(p[:, 0] - self.disk_center[0], p[:, 1] - self.disk_center[1]) >= self.disk_radius

    def centers(self) -> np.ndarray:
        """Centre of the embedding at every T-cell."""
        p = self.t_points()
        out = np.asarray(self.g_T(self.q(p)), dtype=float)
        rows, cols = self.slab_cells()
        I_centers = np.array([e.center for e in self.g_I.embeddings])
        for r in rows:
            out[r * self.n_side + cols] = I_centers
        return out

    def induced_I_weight(self, alpha_T: np.ndarray) -> np.ndarray:
        """Fibre average of a T-weight: alpha_I(u_k) = (1/R) sum_i rho_i alpha(row i, col k)."""
        a = np.asarray(alpha_T, dtype=float).reshape(self.n_side, self.n_side)
        rows, cols = self.slab_cells()
        return (self.rho[:, None] * a[np.ix_(rows, cols)]).mean(axis=0)


def make_bicover(g_T, g_I: ContinuousCover, disk_center, disk_radius, n_side: int,
                 slab_col0: int, slab_row0: int, rho: np.ndarray, q=None) -> Bicover:
    """Assemble and verify a bicover on a T-grid of ``n_side^2`` cells.

    ``q`` defaults to the radial map contracting D onto its centre, identity
    outside D.  Raises :class:`CoverError` if any condition fails.
    """
    rho = np.asarray(rho, dtype=float)
    cx, cy = disk_center
    if q is None:
        def q(p, c=np.array([cx, cy]), R=disk_radius):
            # collapse the inner half of D onto its centre, stretch the rest
            d = p - c
            r = np.hypot(d[:, 0], d[:, 1])
            scale = np.where(r >= R, 1.0, np.clip((r - 0.5 * R) / (0.5 * R), 0.0, 1.0))
            return c + d * scale[:, None]
    bc = Bicover(g_T, g_I, (float(cx), float(cy)), float(disk_radius), int(n_side),
                 int(slab_col0), int(slab_row0), rho, q)
    # (1) D in int T, slab inside int D
    if not (disk_radius < cx < 1 - disk_radius and disk_radius < cy < 1 - disk_radius):
        raise CoverError("disk D must lie in the interior of T")
    h = 1.0 / n_side
    rows, cols = bc.slab_cells()
    if rows[-1] >= n_side or cols[-1] >= n_side or rows[0] < 0 or cols[0] < 0:
        raise CoverError("slab leaves the T-grid")
    corners = np.array([[cols[0] * h, rows[0] * h], [(cols[-1] + 1) * h, rows[0] * h],
                        [cols[0] * h, (rows[-1] + 1) * h], [(cols[-1] + 1) * h, (rows[-1] + 1) * h]])
    if np.any(np.hypot(corners[:, 0] - cx, corners[:, 1] - cy) >= disk_radius):
        raise CoverError("slab must lie in the interior of D")
    # (2) outside int D the family is G_T o q
    p = bc.t_points()
    out = bc.outside_mask()
    C = bc.centers()
    direct = np.asarray(g_T(p[out]), dtype=float)
    res2 = float(np.max(np.abs(C[out] - direct))) if out.any() else 0.0
    qres = float(np.max(np.abs(bc.q(p[out]) - p[out]))) if out.any() else 0.0
    # (3) on the slab the family is G_I, with unit fibre mass
    I_centers = np.array([e.center for e in g_I.embeddings])
    res3 = max(float(np.max(np.abs(C[r * n_side + cols] - I_centers))) for r in rows)
    mass = bc.fiber_mass()
    bc.conditions = {"outside_residual": res2, "q_identity_residual": qres,
                     "slab_residual": res3, "fiber_mass": mass}
    if res2 > 0 or qres > 1e-12 or res3 > 0:
        raise CoverError(f"bicover conditions fail: {bc.conditions}")
    if abs(mass - 1) > 1e-10:
        raise CoverError(f"fibre mass {mass} is not 1")
    return bc


def translation_family(surface: ChartedSurface, c: float, eta: float = DEFAULT_ETA):
    """G_T(t) = translated disk centred at t (T identified with the torus chart)."""
    x0, x1, y0, y1 = surface.rect

    def g(p):
        p = np.asarray(p, dtype=float)
        return np.column_stack([x0 + p[:, 0] * (x1 - x0), y0 + p[:, 1] * (y1 - y0)])
    return g


__all__ = [
    "CoverError", "EmbeddingError", "DiskEmbedding", "TranslatedDisk", "CapEmbedding", "BandEmbedding",
    "WholeChart", "translated_disk", "cap_embedding", "cap_at_axis", "band_embedding", "symplectic_residual",
    "embedding_from_dict", "DiscreteCover", "ContinuousCover", "make_continuous_cover", "interpolate_centers",
    "boustrophedon_path", "inclusion_matrix", "max_block", "lebesgue_number", "coarse_grain",
    "continuous_from_discrete", "quartic_profile", "Bicover", "make_bicover", "translation_family",
]
