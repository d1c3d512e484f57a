"""Partitions of unity subordinated to covers.

Every partition stores, per slice, the samples of ``F`` and of its two chart
derivatives, plus the quadrature weight of the slice (1 for discrete
partitions, ``1/M_t`` for continuous ones).  Normalized bump partitions carry
quotient-rule derivatives

    grad F_k = (grad g_k - F_k grad S) / S,    S = sum_l w_l g_l,

with ``grad g`` taken by finite differences.  The weighted sum of these
derivatives vanishes up to rounding of ``sum_k w_k F_k - 1`` instead of
rounding amplified by the stencil, which keeps two-set brackets at 1e-14.

Continuous partitions are stored sparsely: only slices that are not
identically zero are kept, with ``t_index`` giving their t-cell.
"""

from __future__ import annotations

import math
import uuid
from dataclasses import dataclass, field, replace

import numpy as np

from .surface import ChartedSurface, ScalarField, fd_gradient

PROFILE_KINDS = ("poly", "smoothstep", "flat-exp")


class PartitionError(ValueError):
    pass


class FamilyError(PartitionError):
    pass


@dataclass(frozen=True)
class BumpProfile:
    kind: str = "poly"
    exponent: float = 2.0
    plateau: float = 0.0

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise PartitionError(f"unknown profile kind {self.kind!r}")
        if self.kind != "flat-exp" and self.exponent < 2:
            raise PartitionError("exponent must be >= 2 for a C^1 profile")
        if not (0 <= self.plateau < 1):
            raise PartitionError("plateau fraction must lie in [0, 1)")

    def __call__(self, s: np.ndarray) -> np.ndarray:
        q = self.plateau
        sp = np.maximum(0.0, (s - q) / (1.0 - q))
        inside = sp < 1.0
        out = np.zeros_like(sp)
        x = sp[inside]
        if self.kind == "poly":
            out[inside] = (1.0 - x * x) ** self.exponent
        elif self.kind == "smoothstep":
            y = 1.0 - x
            out[inside] = (y * y * (3.0 - 2.0 * y)) ** self.exponent
        else:
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - x * x))
        return out


@dataclass(frozen=True)
class BumpSpec:
    """Absolute bump data for one embedding, in its flat coordinates."""

    profile: BumpProfile
    support: float  # radius (disks) or half-width (bands) of the bump support
    amplitude: float = 1.0
    offset: tuple[float, ...] = (0.0, 0.0)
    # optional elliptical support (disks only): semi-axes (a, b), a along `angle`
    axes: tuple[float, float, float] | None = None

    def extent(self) -> float:
        """Farthest flat-coordinate distance reached by the support."""
        r = max(self.axes[0], self.axes[1]) if self.axes else self.support
        return r + math.hypot(*self.offset)

    def scaled_distance(self, embedding, u: np.ndarray) -> np.ndarray:
        """Distance to the bump centre in units of the support (1 on its boundary)."""
        if self.axes is None:
            return embedding.profile_distance(u, self.offset) / self.support
        a, b, ang = self.axes
        d = u - np.asarray(self.offset)
        c, s = math.cos(ang), math.sin(ang)
        return np.hypot((c * d[:, 0] + s * d[:, 1]) / a, (-s * d[:, 0] + c * d[:, 1]) / b)

    def boundary(self, n: int = 256) -> np.ndarray:
        """Flat points on the support boundary (disk embeddings)."""
        phi = 2 * math.pi * np.arange(n) / n
        a, b, ang = self.axes if self.axes else (self.support, self.support, 0.0)
        x, y = a * np.cos(phi), b * np.sin(phi)
        c, s = math.cos(ang), math.sin(ang)
        return np.column_stack([c * x - s * y, s * x + c * y]) + np.asarray(self.offset)


def bump_values(embedding, surface: ChartedSurface, spec: BumpSpec) -> np.ndarray:
    u = embedding.local_coords(surface.points(), surface)
    s = spec.scaled_distance(embedding, u)
    s = np.where(np.isfinite(s), s, np.inf)
    return (spec.amplitude * spec.profile(s)).reshape(surface.shape)


# -- container -------------------------------------------------------------


@dataclass(eq=False)
class Partition:
    surface: ChartedSurface
    fields: np.ndarray  # (n, nx, ny)
    gx: np.ndarray
    gy: np.ndarray
    weights: np.ndarray  # (n,)
    kind: str  # "discrete" | "continuous"
    n_t: int  # t-cells (continuous) or sets (discrete)
    t_index: np.ndarray  # (n,) t-cell of each stored slice
    embeddings: list = field(default_factory=list)
    specs: list | None = None
    cover: object = None
    provenance: dict = field(default_factory=dict)
    token: str = field(default_factory=lambda: uuid.uuid4().hex)
    # (parent partition, C) when every slice is sum_i C[k, i] * parent slice i
    parent: tuple | None = None

    @property
    def n(self) -> int:
        return self.fields.shape[0]

    def total(self) -> np.ndarray:
        """Quadrature sum of the slices (the t-integral in the continuous case)."""
        return np.tensordot(self.weights, self.fields, axes=1)

    def field(self, i: int) -> ScalarField:
        return ScalarField(self.surface, self.fields[i], (self.gx[i], self.gy[i]))

    def as_fields(self) -> list[ScalarField]:
        return [self.field(i) for i in range(self.n)]

    def combine(self, coeffs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """sum_k w_k a_k F_k and its gradient, for per-slice coefficients a."""
        c = np.asarray(coeffs, dtype=float) * self.weights
        return tuple(np.tensordot(c, arr, axes=1) for arr in (self.fields, self.gx, self.gy))

    def dense_t(self) -> np.ndarray:
        """All n_t slices (zeros where not stored), continuous partitions only."""
        out = np.zeros((self.n_t,) + self.surface.shape)
        out[self.t_index] = self.fields
        return out

    def relabeled(self, perm) -> "Partition":
        perm = np.asarray(perm)
        return replace(
            self,
            fields=self.fields[perm],
            gx=self.gx[perm],
            gy=self.gy[perm],
            weights=self.weights[perm],
            t_index=self.t_index[perm] if self.kind == "continuous" else np.arange(self.n),
            embeddings=[self.embeddings[i] for i in perm] if self.embeddings else [],
            specs=[self.specs[i] for i in perm] if self.specs else None,
            token=uuid.uuid4().hex,
            parent=(self, np.eye(self.n)[perm]),
        )


def _discrete(surface, fields, gx, gy, embeddings, specs, cover, provenance) -> Partition:
    n = fields.shape[0]
    return Partition(surface, fields, gx, gy, np.ones(n), "discrete", n, np.arange(n),
                     list(embeddings), specs, cover, provenance)


def normalized_partition(cover, specs: list[BumpSpec], surface: ChartedSurface | None = None) -> Partition:
    """F_k = g_k / sum_l w_l g_l for bumps ``g_k`` described by ``specs``."""
    surface = surface or cover.surface
    embs = cover.embeddings
    if len(specs) != len(embs):
        raise PartitionError(f"{len(specs)} bump specs for {len(embs)} embeddings")
    w = cover.quadrature_weights()
    for e, sp in zip(embs, specs):
        if sp.extent() > e.inner_extent * (1 + 1e-12):
            raise PartitionError("bump support leaves the inner disk of its embedding")
    g = np.stack([bump_values(e, surface, sp) for e, sp in zip(embs, specs)])
    S = np.tensordot(w, g, axes=1)
    bad = S <= 0
    if bad.any():
        raise PartitionError(f"{int(bad.sum())} grid points carry zero bump mass; cover too thin for the profile")
    dgx, dgy = fd_gradient(surface, g)
    Sx, Sy = np.tensordot(w, dgx, axes=1), np.tensordot(w, dgy, axes=1)
    F = g / S
    gx = (dgx - F * Sx) / S
    gy = (dgy - F * Sy) / S
    prov = {"op": "normalized_partition"}
    if cover.kind == "continuous":
        nt = len(embs)
        keep = np.flatnonzero(np.any(F != 0, axis=(1, 2)))
        return Partition(surface, F[keep], gx[keep], gy[keep], w[keep], "continuous", nt, keep,
                         [embs[i] for i in keep], [specs[i] for i in keep], cover, prov)
    return _discrete(surface, F, gx, gy, embs, list(specs), cover, prov)


def canonical_specs(cover, profile: BumpProfile | None = None) -> list[BumpSpec]:
    profile = profile or BumpProfile()
    return [BumpSpec(profile, e.inner_extent, 1.0, e.zero_offset()) for e in cover.embeddings]


def canonical_partition(cover, profile: BumpProfile | None = None, surface: ChartedSurface | None = None) -> Partition:
    """Normalized bumps supported on the inner disks, matching the cover kind."""
    p = normalized_partition(cover, canonical_specs(cover, profile), surface)
    p.provenance = {"op": "canonical_partition"}
    return p


# -- parametric family -----------------------------------------------------


class PartitionFamily:
    """Normalized-bump partitions indexed by a box of shape parameters.

    Parameter groups (``vary``):

    * ``shape``: profile exponent in [2, 8], plateau fraction in [0, 0.8],
      support fraction of the inner disk in [0.6, 1];
    * ``amplitude``: one multiplier in [0, 2] per set (discrete covers);
    * ``offset``: bump centre offsets inside the inner disk, one per flat
      coordinate per set (discrete covers), scaled so the support never
      leaves the inner disk.

    The default parameter is the canonical partition.  Lipschitz dependence on
    the parameter holds wherever bump mass stays positive; the family rejects
    parameters that lose coverage.
    """

    SHAPE_BOUNDS = ((2.0, 8.0), (0.0, 0.8), (0.6, 1.0))
    SHAPE_DEFAULT = (2.0, 0.0, 1.0)

    def __init__(self, cover, kind: str = "poly", vary=("shape", "amplitude", "offset")):
        if kind not in PROFILE_KINDS:
            raise FamilyError(f"unknown profile kind {kind!r}")
        vary = tuple(vary)
        if cover.kind == "continuous":
            vary = tuple(v for v in vary if v == "shape")
        self.cover = cover
        self.kind = kind
        self.vary = vary
        n = len(cover.embeddings)
        self._offdim = [e.offset_dim for e in cover.embeddings]
        lo, hi, x0 = [], [], []
        if "shape" in vary:
            for (a, b), d in zip(self.SHAPE_BOUNDS, self.SHAPE_DEFAULT):
                lo.append(a), hi.append(b), x0.append(d)
        if "amplitude" in vary:
            lo += [0.0] * n
            hi += [2.0] * n
            x0 += [1.0] * n
        if "offset" in vary:
            m = sum(self._offdim)
            lo += [-1.0] * m
            hi += [1.0] * m
            x0 += [0.0] * m
        self.lower = np.array(lo)
        self.upper = np.array(hi)
        self.default = np.array(x0)

    @property
    def dim(self) -> int:
        return self.default.size

    def check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != self.default.shape:
            raise FamilyError(f"theta has shape {theta.shape}, expected {self.default.shape}")
        if np.any(theta < self.lower - 1e-12) or np.any(theta > self.upper + 1e-12):
            raise FamilyError("theta outside the family box")
        return np.clip(theta, self.lower, self.upper)

    def specs(self, theta) -> list[BumpSpec]:
        theta = self.check(theta)
        embs = self.cover.embeddings
        n = len(embs)
        i = 0
        p, q, f = self.SHAPE_DEFAULT
        if "shape" in self.vary:
            p, q, f = theta[0:3]
            i = 3
        amps = np.ones(n)
        if "amplitude" in self.vary:
            amps = theta[i:i + n]
            i += n
        profile = BumpProfile(self.kind, float(p), float(q))
        out = []
        for j, e in enumerate(embs):
            support = float(f) * e.inner_extent
            off = e.zero_offset()
            if "offset" in self.vary:
                k = self._offdim[j]
                raw = theta[i:i + k]
                i += k
                scale = (e.inner_extent - support) / math.sqrt(k)
                off = tuple(float(v) * scale for v in raw)
            out.append(BumpSpec(profile, support, float(amps[j]), off))
        return out

    def partition(self, theta, surface: ChartedSurface | None = None) -> Partition:
        p = normalized_partition(self.cover, self.specs(theta), surface)
        p.provenance = {"op": "parametric_family", "theta": [float(v) for v in np.asarray(theta)]}
        return p

    def to_unit(self, theta) -> np.ndarray:
        span = np.where(self.upper > self.lower, self.upper - self.lower, 1.0)
        return (np.asarray(theta) - self.lower) / span

    def from_unit(self, x) -> np.ndarray:
        return self.lower + np.clip(x, 0.0, 1.0) * (self.upper - self.lower)


def parametric_family(cover, theta=None, kind: str = "poly", vary=("shape", "amplitude", "offset"),
                      surface: ChartedSurface | None = None) -> Partition:
    fam = PartitionFamily(cover, kind, vary)
    return fam.partition(fam.default if theta is None else theta, surface)


# -- verification ----------------------------------------------------------


@dataclass
class PartitionReport:
    max_deviation: float
    min_value: float
    support_ok: list[bool]

    @property
    def ok(self) -> bool:
        return self.max_deviation < 1e-10 and self.min_value >= 0 and all(self.support_ok)


def verify_partition(partition: Partition) -> PartitionReport:
    dev = float(np.max(np.abs(partition.total() - 1.0)))
    mn = float(np.min(partition.fields)) if partition.n else 0.0
    flags = []
    pts = partition.surface.points()
    for k, e in enumerate(partition.embeddings):
        pos = partition.fields[k].ravel() > 0
        if not pos.any():
            flags.append(True)
            continue
        u = e.local_coords(pts[pos], partition.surface)
        r = e.profile_distance(u, e.zero_offset())
        flags.append(bool(np.all(np.isfinite(r) & (r < e.inner_extent))))
    return PartitionReport(dev, mn, flags)


# -- bicover extension -----------------------------------------------------


def extend_partition_to_bicover(F_I: Partition, bicover) -> Partition:
    """Spread an I-partition over the slab of a bicover.

    Slab cell (row i, column k) carries ``rho_i V_I^-1 F_I(u_k)``; all other
    T-cells carry zero.  With the T midpoint rule the T-integral is the
    I-integral of ``F_I``.
    """
    if F_I.kind != "continuous" or F_I.n_t != bicover.n_i:
        raise PartitionError("F_I must be a continuous partition on the bicover's I-grid")
    if abs(bicover.fiber_mass() - 1.0) > 1e-10:
        raise PartitionError(f"fiber mass {bicover.fiber_mass()} is not 1")
    dense = F_I.dense_t()
    dgx = np.zeros_like(dense)
    dgy = np.zeros_like(dense)
    dgx[F_I.t_index], dgy[F_I.t_index] = F_I.gx, F_I.gy
    wT = bicover.cell_weight
    VI = bicover.slab_volume
    rows, cols = bicover.slab_cells()
    stored = {int(t): j for j, t in enumerate(F_I.t_index)}
    fields, gxs, gys, tix, coef = [], [], [], [], []
    for i, r in enumerate(rows):
        scale = bicover.rho[i] / VI
        for k, c in enumerate(cols):
            if k not in stored:
                continue
            fields.append(scale * dense[k])
            gxs.append(scale * dgx[k])
            gys.append(scale * dgy[k])
            tix.append(r * bicover.n_side + c)
            coef.append((stored[k], scale))
    order = np.argsort(tix)
    fields, gxs, gys = (np.stack(a)[order] for a in (fields, gxs, gys))
    tix = np.asarray(tix)[order]
    C = np.zeros((len(tix), F_I.n))
    for row, o in enumerate(order):
        C[row, coef[o][0]] = coef[o][1]
    return Partition(F_I.surface, fields, gxs, gys, np.full(len(tix), wT), "continuous",
                     bicover.n_side**2, tix, [], None, bicover,
                     {"op": "extend_partition_to_bicover", "source": F_I.token, "rows": len(rows)},
                     parent=(F_I, C))
