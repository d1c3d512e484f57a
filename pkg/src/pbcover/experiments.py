"""Drivers: pb minimization, pb(c) sweeps and the cross-checks.

Every value reported here is an upper bound of the cover invariant: the
infimum over all partitions is replaced by a search over a parametric
family.  Consistency checks compare computed quantities against the
inequalities they must satisfy and record each comparison.
"""

from __future__ import annotations

import math
import os
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import cover as cv
from .io import dumps, write_csv
from .partition import (
    BumpProfile,
    BumpSpec,
    Partition,
    PartitionError,
    PartitionFamily,
    canonical_partition,
    extend_partition_to_bicover,
    normalized_partition,
    verify_partition,
)
from .pbnorm import (
    PbConfig,
    pb_of_partition,
    weight_correspondence_residual,
    window_weight_residual,
)
from .spacefill import HilbertCurve, PiecewiseConstantWeight, pushforward_weight
from .surface import ChartedSurface, displacement_energy_cap, make_surface


class ExperimentError(ValueError):
    pass


# -- optimizer ---------------------------------------------------------------


@dataclass
class OptimizerConfig:
    restarts: int = 8
    max_evals: int = 500
    seed: int = 0
    method: str = "auto"
    threads: int = 1
    vary: tuple = ("shape", "amplitude", "offset")
    profile: str = "poly"


@dataclass
class MinimizeResult:
    theta: np.ndarray
    report: object
    canonical_value: float
    evaluations: int
    restarts: list = field(default_factory=list)

    @property
    def value(self) -> float:
        return self.report.value


def minimize_pb(cover, family: PartitionFamily | None = None, config: OptimizerConfig | None = None,
                surface: ChartedSurface | None = None) -> MinimizeResult:
    """Multi-start bounded Nelder-Mead over the family box.

    The first start is the canonical parameter, so the result never exceeds
    the canonical partition's pb.  Parameters that lose coverage score +inf.
    """
    config = config or OptimizerConfig()
    family = family or PartitionFamily(cover, config.profile, config.vary)
    pbc = PbConfig(threads=config.threads, seed=config.seed)
    cache: dict[bytes, float] = {}
    count = [0]

    def value(theta) -> float:
        key = np.round(theta, 15).tobytes()
        if key not in cache:
            count[0] += 1
            try:
                part = family.partition(theta, surface)
                cache[key] = pb_of_partition(part, config.method, pbc).value
            except PartitionError:
                cache[key] = math.inf
        return cache[key]

    def objective(x):
        return value(family.from_unit(x))

    canonical = value(family.default)
    if not math.isfinite(canonical):
        raise ExperimentError("canonical parameter is not admissible for this cover")
    best_theta, best_val = family.default.copy(), canonical
    rng = np.random.default_rng(config.seed)
    runs = []
    for k in range(config.restarts):
        x0 = family.to_unit(family.default) if k == 0 else rng.uniform(0, 1, family.dim)
        if family.dim == 0:
            break
        before = count[0]
        with warnings.catch_warnings():
            # rejected parameters score +inf, so the simplex spread test may see inf - inf
            warnings.filterwarnings("ignore", "invalid value encountered in subtract", RuntimeWarning)
            res = minimize(objective, x0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * family.dim,
                           options={"maxfev": config.max_evals, "xatol": 1e-6, "fatol": 1e-9})
        theta = family.from_unit(res.x)
        val = value(theta)
        runs.append({"start": k, "value": val, "evaluations": count[0] - before})
        if val < best_val:
            best_theta, best_val = theta, val
    report = pb_of_partition(family.partition(best_theta, surface), config.method, pbc)
    return MinimizeResult(best_theta, report, canonical, count[0], runs)


# -- cover templates ---------------------------------------------------------


def lattice_k(c: float, eta: float = cv.DEFAULT_ETA, area: float = 1.0, k_max: int = 8) -> int:
    """Smallest k whose k x k lattice of inner disks covers the unit-area torus."""
    for k in range(1, k_max + 1):
        # inner radius must exceed the half-diagonal of a lattice cell
        if (1 - eta) * c / math.pi > area / (2 * k * k):
            if 2 * math.sqrt((1 + eta) * c / math.pi) < math.sqrt(area):
                return k
            break
    raise ExperimentError(f"capacity {c} is below the lattice covering threshold (k <= {k_max})")


def lattice_cover(surface: ChartedSurface, c: float, k: int | None = None, eta: float = cv.DEFAULT_ETA):
    if surface.kind != "torus":
        raise ExperimentError("the lattice template needs a torus")
    k = lattice_k(c, eta, surface.area) if k is None else k
    x0, x1, y0, y1 = surface.rect
    w, h = x1 - x0, y1 - y0
    centers = [(x0 + (i + 0.5) * w / k, y0 + (j + 0.5) * h / k) for i in range(k) for j in range(k)]
    return cv.DiscreteCover(surface, [cv.translated_disk(surface, p, c, eta) for p in centers])


_SOLIDS = {
    2: np.array([[0, 0, 1], [0, 0, -1]], float),
    4: np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], float) / math.sqrt(3),
    5: np.array([[0, 0, 1], [0, 0, -1], [1, 0, 0], [-0.5, math.sqrt(3) / 2, 0], [-0.5, -math.sqrt(3) / 2, 0]], float),
    6: np.array([[0, 0, 1], [0, 0, -1], [1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]], float),
}


def random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def cap_cover(sphere: ChartedSurface, axes, areas, eta: float = cv.DEFAULT_ETA):
    areas = np.broadcast_to(np.asarray(areas, dtype=float), (len(axes),))
    return cv.DiscreteCover(sphere, [cv.cap_at_axis(sphere, a, c, eta) for a, c in zip(axes, areas)])


def solid_cover(sphere: ChartedSurface, n: int, areas, rotation=None, eta: float = cv.DEFAULT_ETA):
    axes = _SOLIDS[n] if rotation is None else _SOLIDS[n] @ np.asarray(rotation).T
    return cap_cover(sphere, axes, areas, eta)


def sphere_template(sphere: ChartedSurface, c: float, eta: float = cv.DEFAULT_ETA):
    """Fewest symmetric caps of area ``c`` whose inner caps cover the sphere."""
    for n in (2, 4, 6):
        try:
            cov = solid_cover(sphere, n, c, eta=eta)
            canonical_partition(cov)
            return cov
        except (cv.CoverError, PartitionError):
            continue
    raise ExperimentError(f"capacity {c} is below the cap-template covering threshold")


def cover_template(surface: ChartedSurface, c: float, template: str = "lattice", eta: float = cv.DEFAULT_ETA):
    if template == "lattice":
        return lattice_cover(surface, c, eta=eta)
    if template == "caps":
        return sphere_template(surface, c, eta)
    raise ExperimentError(f"unknown cover template {template!r}")


# -- pb(c) sweep -------------------------------------------------------------


@dataclass
class SweepRow:
    capacity: float
    pb: float  # best upper bound at this capacity
    pb_own: float  # this capacity's own template, optimized independently
    source: float  # capacity whose partition realizes `pb`
    evaluations: int
    theta: list  # family parameter of the realizing partition (on the source template)
    theta_own: list
    cover: dict


@dataclass
class SweepTable:
    rows: list = field(default_factory=list)
    surface: dict = field(default_factory=dict)

    def capacities(self):
        return [r.capacity for r in self.rows]

    def values(self, column: str = "pb"):
        return [getattr(r, column) for r in self.rows]

    def to_dict(self) -> dict:
        return {"surface": self.surface, "rows": [r.__dict__ for r in self.rows]}

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def to_csv(self, path) -> None:
        write_csv(path, ["capacity", "pb", "pb_own", "source_capacity", "evaluations", "n_sets"],
                  [(r.capacity, r.pb, r.pb_own, r.source, r.evaluations, r.cover.get("n_sets", 0))
                   for r in self.rows])


def _own_minimum(args):
    surface, c, template, config, eta = args
    cov = cover_template(surface, c, template, eta)
    res = minimize_pb(cov, PartitionFamily(cov, config.profile, config.vary), config)
    return res.theta, res.value, res.evaluations


def pb_curve_sweep(surface: ChartedSurface, capacities, template: str = "lattice",
                   config: OptimizerConfig | None = None, eta: float = cv.DEFAULT_ETA,
                   workers: int = 1) -> SweepTable:
    """Upper bounds of pb(c) over an increasing list of capacities.

    Each capacity gets its own minimal template cover and an optimized
    partition (``pb_own``).  A partition found at a smaller capacity ``c'``
    also serves capacity ``c``: the same bumps, read on disks of capacity
    ``c`` with the same centres, give identical fields.  The reported
    ``pb`` is the best of the own value and all such restrictions.
    Capacities are optimized independently, in ``workers`` processes.
    """
    config = config or OptimizerConfig()
    caps = [float(c) for c in capacities]
    if any(b <= a for a, b in zip(caps, caps[1:])):
        raise ExperimentError("capacities must be strictly increasing")
    covers = [cover_template(surface, c, template, eta) for c in caps]  # fail early below threshold
    jobs = [(surface, c, template, config, eta) for c in caps]
    # more processes than cores only adds overhead; rows do not depend on the count
    workers = min(workers, len(jobs), len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            own = list(pool.map(_own_minimum, jobs))
    else:
        own = [_own_minimum(j) for j in jobs]
    table = SweepTable(surface=surface.describe())
    found = []  # (capacity, cover, theta, specs)
    for c, cov, (theta, val, evals) in zip(caps, covers, own):
        specs = PartitionFamily(cov, config.profile, config.vary).specs(theta)
        best, src, best_theta = val, c, theta
        for c0, cov0, theta0, specs0 in found:
            v0 = restricted_pb(cov0, specs0, c, config.method)
            if v0 < best:
                best, src, best_theta = v0, c0, theta0
        found.append((c, cov, theta, specs))
        table.rows.append(SweepRow(c, best, val, src, evals, [float(x) for x in best_theta],
                                   [float(x) for x in theta], {"template": template, "n_sets": cov.n}))
    return table


def row_partition(surface, row: SweepRow, config: OptimizerConfig | None = None, template: str = "lattice",
                  eta: float = cv.DEFAULT_ETA):
    """Rebuild the partition realizing a sweep row, with its pb report."""
    config = config or OptimizerConfig()
    cov0 = cover_template(surface, row.source, template, eta)
    specs = PartitionFamily(cov0, config.profile, config.vary).specs(np.asarray(row.theta))
    part = normalized_partition(enlarge(cov0, row.capacity), specs)
    return part, pb_of_partition(part, config.method)


def enlarge(cover, c: float):
    """Same centres, capacity ``c``."""
    return cv.DiscreteCover(cover.surface, [e.with_capacity(c) for e in cover.embeddings])


def restricted_pb(cover, specs, c: float, method: str = "auto") -> float:
    big = enlarge(cover, c)
    return pb_of_partition(normalized_partition(big, specs), method).value


def monotonicity_report(table, tol: float = 0.05, column: str = "pb") -> list[dict]:
    """Rows where the next value exceeds the current one by more than ``tol`` (relative)."""
    if isinstance(table, SweepTable):
        caps, vals = table.capacities(), table.values(column)
    else:
        caps, vals = zip(*table) if len(table) else ((), ())
    out = []
    for i in range(len(vals) - 1):
        if vals[i + 1] > vals[i] * (1 + tol) + 1e-300:
            out.append({"index": i + 1, "capacity": caps[i + 1], "value": vals[i + 1],
                        "previous_capacity": caps[i], "previous_value": vals[i]})
    return out


def emit_plot_data(table: SweepTable, path, column: str = "pb") -> None:
    with open(path, "w") as fh:
        fh.write(f"# capacity {column}\n")
        for c, v in zip(table.capacities(), table.values(column)):
            fh.write(f"{c:.17g} {v:.17g}\n")


# -- consistency reports -----------------------------------------------------


@dataclass
class CheckRecord:
    check: str
    lhs: float
    rhs: float
    passed: bool
    detail: str = ""

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs


@dataclass
class ConsistencyReport:
    records: list = field(default_factory=list)

    def add(self, check, lhs, rhs, passed, detail="") -> CheckRecord:
        rec = CheckRecord(check, float(lhs), float(rhs), bool(passed), detail)
        self.records.append(rec)
        return rec

    def extend(self, other: "ConsistencyReport") -> "ConsistencyReport":
        self.records.extend(other.records)
        return self

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def to_dict(self) -> dict:
        return {"passed": self.passed,
                "records": [dict(r.__dict__, margin=r.margin) for r in self.records]}

    def to_csv(self, path) -> None:
        write_csv(path, ["check", "lhs", "rhs", "margin", "passed", "detail"],
                  [(r.check, r.lhs, r.rhs, r.margin, int(r.passed), r.detail) for r in self.records])


def polterovich_consistency(cover, partition: Partition | None = None, method: str = "auto",
                            label: str = "polterovich") -> ConsistencyReport:
    """pb(F) * 4 * max_j e_H(U_j) >= 1/(2 N^2) for displaceable caps."""
    s = cover.surface
    if s.kind != "sphere":
        raise ExperimentError("the check applies to cap covers of the sphere")
    for e in cover.embeddings:
        if not e.capacity < s.area / 2:
            raise ExperimentError(f"cap of area {e.capacity} is not displaceable (needs < {s.area / 2})")
    partition = partition or canonical_partition(cover)
    rep = pb_of_partition(partition, method)
    n = cover.n
    eh = max(displacement_energy_cap(e.capacity, s.area) for e in cover.embeddings)
    lhs = rep.value * 4 * eh
    rhs = 1.0 / (2 * n * n)
    out = ConsistencyReport()
    out.add(label, lhs, rhs, lhs >= rhs,
            f"N={n} pb={rep.value:.17g} max_eH={eh:.17g} ratio={lhs / rhs:.6g}")
    return out


def coarse_polterovich(ccover, cpartition: Partition, N: int, method: str = "auto") -> ConsistencyReport:
    """Continuous displaceable cover: coarse-grain, then check the finite bound."""
    dcover, dpart, _ = cv.coarse_grain(ccover, cpartition, N)
    out = polterovich_consistency(dcover, dpart, method, label=f"polterovich-coarse-N{N}")
    pc = pb_of_partition(cpartition, method).value
    pd = pb_of_partition(dpart, method).value
    out.add("coarse-pb", pc + 1e-9, pd, pd <= pc + 1e-9, "pb(F') <= pb(F)")
    return out


def random_two_set_covers(n: int, seed: int = 0, torus: ChartedSurface | None = None,
                          sphere: ChartedSurface | None = None):
    """Alternating torus band pairs and sphere cap pairs, all covering."""
    rng = np.random.default_rng(seed)
    torus = torus or make_surface("torus", 1.0, (128, 128))
    sphere = sphere or make_surface("sphere", 4 * math.pi, (128, 64))
    eta = cv.DEFAULT_ETA
    out = []
    for k in range(n):
        if k % 2 == 0:
            d = rng.choice(["h", "v"])
            l1 = rng.uniform(0, 1)
            gap = rng.uniform(0.4, 0.5)
            # inner half-widths must jointly exceed the larger gap
            need = (1 - gap) + 0.05
            share = rng.uniform(0.4, 0.6)
            c1, c2 = (need * share * 2 / (1 - eta), need * (1 - share) * 2 / (1 - eta))
            out.append(cv.DiscreteCover(torus, [cv.band_embedding(torus, d, l1, c1, eta),
                                                cv.band_embedding(torus, d, (l1 + gap) % 1.0, c2, eta)]))
        else:
            R = random_rotation(rng)
            gamma = rng.uniform(0.8 * math.pi, math.pi)
            total = 2 * math.pi - gamma + 0.2
            share = rng.uniform(0.45, 0.55)
            psi = (total * share, total * (1 - share))
            n1 = np.array([0, 0, 1.0])
            n2 = np.array([math.sin(gamma), 0, math.cos(gamma)])
            areas = [(sphere.area / 2) * (1 - math.cos(p)) / (1 - eta) for p in psi]
            out.append(cap_cover(sphere, [R @ n1, R @ n2], areas, eta))
    return out


def two_set_vanishing(n: int = 20, seed: int = 0, tol: float = 1e-12) -> ConsistencyReport:
    out = ConsistencyReport()
    for k, cov in enumerate(random_two_set_covers(n, seed)):
        val = pb_of_partition(canonical_partition(cov)).value
        out.add(f"two-set-{k}-{cov.surface.kind}", tol, val, val < tol, f"pb={val:.3g}")
    return out


def half_area_vanishing(grid=(256, 128), area_factor: float = 2.2, tol: float = 1e-12,
                        eta: float = 0.05) -> ConsistencyReport:
    """Two antipodal caps just over half the area.  The margin ``eta`` must
    leave inner caps of more than half the area each, hence the small value."""
    S = make_surface("sphere", 4 * math.pi, grid)
    cov = solid_cover(S, 2, area_factor * math.pi, eta=eta)
    val = pb_of_partition(canonical_partition(cov)).value
    out = ConsistencyReport()
    out.add("half-area", tol, val, val < tol, f"two caps of area {area_factor}pi: pb={val:.3g}")
    return out


def polterovich_suite(seed: int = 0, grid=(256, 128)) -> tuple[ConsistencyReport, list]:
    """Ten displaceable cap covers (N <= 6) under random rotations."""
    S = make_surface("sphere", 4 * math.pi, grid)
    rng = np.random.default_rng(seed)
    configs = [(4, 1.5 * math.pi)] * 3 + [(4, 1.6 * math.pi)] * 3 + [(5, 1.4 * math.pi)] * 2 + [(6, math.pi)] * 2
    out = ConsistencyReport()
    covers = []
    for k, (n, a) in enumerate(configs):
        cov = solid_cover(S, n, a, rotation=random_rotation(rng))
        covers.append(cov)
        out.extend(polterovich_consistency(cov, label=f"polterovich-{k}-N{n}"))
    return out, covers


# -- discrete <-> continuous correspondences -----------------------------------


def three_disk_torus(grid=(128, 128), c: float = 0.6, eta: float = cv.DEFAULT_ETA):
    T = make_surface("torus", 1.0, grid)
    centers = [(1 / 6, 1 / 6), (1 / 2, 1 / 2), (5 / 6, 5 / 6)]
    return cv.DiscreteCover(T, [cv.translated_disk(T, p, c, eta) for p in centers])


def two_row_torus(grid=(128, 128), c: float = 0.3, M_t: int = 128, eta: float = cv.DEFAULT_ETA):
    T = make_surface("torus", 1.0, grid)
    wp, ts = cv.boustrophedon_path(T, 2)
    return cv.make_continuous_cover(T, wp, c, M_t, eta, times=ts)


def two_row_partition(cover, semi_axes=(0.18, 0.26)) -> Partition:
    """Coarse-grainable partition on the 2-row cover.

    Bumps ride on the horizontal legs only, with elliptical supports narrow
    along the direction of travel so that neighbouring samples' images
    contain them; the vertical legs carry zero slices.
    """
    C = np.array([e.center for e in cover.embeddings])
    levels = [cover.surface.rect[2] + (i + 0.5) * cover.surface.periods[1] / 2 for i in range(2)]
    prof = BumpProfile()
    a, b = semi_axes
    specs = []
    for p in C:
        on_row = any(abs(p[1] - lv) < 1e-12 for lv in levels)
        specs.append(BumpSpec(prof, b, 1.0 if on_row else 0.0, (0.0, 0.0), (a, b, 0.0)))
    part = normalized_partition(cover, specs)
    part.provenance = {"op": "normalized_partition", "scenario": "two-row"}
    return part


def correspondence_check(grid=(128, 128), seed: int = 0, draws: int = 8) -> ConsistencyReport:
    """Both conversions between discrete and continuous partitions."""
    rng = np.random.default_rng(seed)
    out = ConsistencyReport()
    dcov = three_disk_torus(grid)
    Fd = canonical_partition(dcov)
    n = dcov.n
    M = 3 * (n + 1) * n  # blocks of the round trip are whole windows
    ccov, Fc = cv.continuous_from_discrete(dcov, Fd, M)
    out.add("cfd-normalization", 1e-10, verify_partition(Fc).max_deviation,
            verify_partition(Fc).max_deviation < 1e-10)
    pd = pb_of_partition(Fd).value
    pc = pb_of_partition(Fc).value
    out.add("pb(F_cont) >= pb(F') - 1e-9", pc, pd - 1e-9, pc >= pd - 1e-9, f"pb(F')={pd:.17g} pb(F)={pc:.17g}")
    for k in range(draws):
        alpha = rng.uniform(-1, 1, M) if k else np.ones(M)
        res = window_weight_residual(Fc, Fd, alpha)
        out.add(f"window-correspondence-{k}", 1e-12, res, res < 1e-12)
    # coarse-grain the spread partition back into n blocks
    _, Fback, r = cv.coarse_grain(ccov, Fc, n)
    diff = float(np.max(np.abs(Fback.fields - Fd.fields[np.argsort(np.unique(r, return_index=True)[1])])))
    out.add("round-trip", 1e-12, diff, diff < 1e-12)
    pb_back = pb_of_partition(Fback).value
    out.add("pb(F') <= pb(F) + 1e-9 [3-disk]", pc + 1e-9, pb_back, pb_back <= pc + 1e-9)
    for k in range(draws):
        a = rng.choice([-1.0, 1.0], Fback.n) if k else np.ones(Fback.n)
        res = weight_correspondence_residual(Fc, Fback, r, a)
        out.add(f"coarse-correspondence-{k}", 1e-12, res, res < 1e-12)
    return out


def two_row_coarse_check(N: int = 16, grid=(128, 128)) -> ConsistencyReport:
    out = ConsistencyReport()
    cc = two_row_torus(grid)
    F = two_row_partition(cc)
    _, Fd, r = cv.coarse_grain(cc, F, N)
    pc, pd = pb_of_partition(F).value, pb_of_partition(Fd).value
    out.add(f"pb(F') <= pb(F) + 1e-9 [2-row, N={N}]", pc + 1e-9, pd, pd <= pc + 1e-9)
    res = weight_correspondence_residual(F, Fd, r, np.ones(Fd.n))
    out.add("coarse-correspondence-ones", 1e-12, res, res < 1e-12)
    return out


def mt_refinement(M_ts=(32, 64, 128, 256), grid=(128, 128), c: float = 0.3, method: str = "auto") -> list[tuple[int, float]]:
    """pb of the 2-row partition as the t-grid is refined.

    Grid-measurable weights are all the evaluator sees, so this curve is the
    reported evidence of how the discretized value settles; no rate is implied.
    """
    out = []
    for M_t in M_ts:
        F = two_row_partition(two_row_torus(grid, c, M_t))
        out.append((int(M_t), pb_of_partition(F, method).value))
    return out


# -- reduction suite -----------------------------------------------------------


@dataclass
class ReductionScenario:
    surface: ChartedSurface
    c: float
    order: int  # Hilbert order; the T-grid has 2^order cells per side
    fine_side: int = 128  # T-grid of the bicover
    rows: int = 16  # fibre rows of the slab
    disk_center: tuple = (0.5, 0.5)
    disk_radius: float = 0.4
    eta: float = cv.DEFAULT_ETA


def _square_cover(surface, c, side, eta):
    """G_T: the disk centred at t, sampled on the midpoints of a side x side T-grid.

    Slice index is ``row * side + col`` with ``t = (col, row)`` midpoints.
    """
    g = cv.translation_family(surface, c, eta)
    mid = (np.arange(side) + 0.5) / side
    Y, X = np.meshgrid(mid, mid, indexing="ij")
    pts = g(np.column_stack([X.ravel(), Y.ravel()]))
    embs = [cv.translated_disk(surface, p, c, eta) for p in pts]
    return cv.ContinuousCover(surface, embs, step_bound=math.inf), g


def reduction_check(sc: ReductionScenario, seed: int = 0, draws: int = 32,
                    F_T: Partition | None = None) -> ConsistencyReport:
    """Square-parametrized cover reduced to I through the Hilbert curve and back."""
    out = ConsistencyReport()
    side = 2 ** sc.order
    curve = HilbertCurve(2, sc.order)
    GT, g = _square_cover(sc.surface, sc.c, side, sc.eta)
    F_T = F_T or canonical_partition(GT)
    if F_T.n_t != side * side:
        raise ExperimentError("F_T is not sampled on the curve's dyadic T-grid")
    # cell k of the curve is T-cell (col, row) = cells[k]
    cells = curve.cells
    perm = cells[:, 1] * side + cells[:, 0]
    dense = np.zeros((side * side,) + sc.surface.shape)
    dgx, dgy = np.zeros_like(dense), np.zeros_like(dense)
    dense[F_T.t_index], dgx[F_T.t_index], dgy[F_T.t_index] = F_T.fields, F_T.gx, F_T.gy
    GI = cv.ContinuousCover(sc.surface, [GT.embeddings[j] for j in perm])
    specs = F_T.specs
    sp_full = None
    if specs is not None:
        sp_full = [None] * (side * side)
        for k, t in enumerate(F_T.t_index):
            sp_full[t] = specs[k]
    keep = [k for k in range(side * side) if dense[perm[k]].any()]
    F_I = Partition(sc.surface, dense[perm][keep], dgx[perm][keep], dgy[perm][keep],
                    np.full(len(keep), 1.0 / (side * side)), "continuous", side * side, np.asarray(keep),
                    [GI.embeddings[k] for k in keep],
                    [sp_full[perm[k]] for k in keep] if sp_full else None, GI,
                    {"op": "curve_pullback", "source": F_T.token})
    pT = pb_of_partition(F_T).value
    pI = pb_of_partition(F_I).value
    out.add("pb(F_T) >= pb(F_I) - 1e-9", pT, pI - 1e-9, pT >= pI - 1e-9, f"pb(F_T)={pT:.17g} pb(F_I)={pI:.17g}")
    # pushforward weights reproduce the combined functions
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(draws):
        a = PiecewiseConstantWeight.uniform(rng.uniform(-1, 1, side * side))
        aT, aligned = pushforward_weight(a, curve)
        if not aligned:
            raise ExperimentError("curve and T-grid are misaligned")
        lhs = np.tensordot(np.asarray(a.values)[F_I.t_index] * F_I.weights, F_I.fields, axes=1)
        tv = _weight_on_slices(aT, side, F_T.t_index)
        rhs = np.tensordot(tv * F_T.weights, F_T.fields, axes=1)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    out.add("pushforward-residual", 1e-9, worst, worst < 1e-9, f"{draws} random I-weights")
    # bicover direction
    bc = bicover_for(sc, GI, g)
    Fx = extend_partition_to_bicover(F_I, bc)
    dev = verify_partition(Fx).max_deviation
    out.add("bicover-normalization", 1e-10, dev, dev < 1e-10)
    px = pb_of_partition(Fx).value
    out.add("pb(F~_I) <= pb(F_I) + 1e-9", pI + 1e-9, px, px <= pI + 1e-9, f"pb(F~_I)={px:.17g}")
    for k in range(4):
        alpha = rng.uniform(-1, 1, bc.n_side ** 2) if k else np.ones(bc.n_side ** 2)
        aI = bc.induced_I_weight(alpha)
        lhs = np.tensordot(alpha[Fx.t_index] * Fx.weights, Fx.fields, axes=1)
        rhs = np.tensordot(aI[F_I.t_index] * F_I.weights, F_I.fields, axes=1)
        res = float(np.max(np.abs(lhs - rhs)))
        out.add(f"fibre-weight-{k}", 1e-9, res, res < 1e-9)
    return out


def _weight_on_slices(aT: PiecewiseConstantWeight, side: int, t_index: np.ndarray) -> np.ndarray:
    """Values of a T-weight on slices indexed ``row * side + col``."""
    vals = np.asarray(aT.values, dtype=float).reshape(side, side)  # [x, y]
    rows, cols = t_index // side, t_index % side
    return vals[cols, rows]


def bicover_for(sc: ReductionScenario, GI, g) -> cv.Bicover:
    n = sc.fine_side
    ni = GI.n_t
    col0 = (n - ni) // 2
    row0 = (n - sc.rows) // 2
    return cv.make_bicover(g, GI, sc.disk_center, sc.disk_radius, n, col0, row0, cv.quartic_profile(sc.rows))


def default_reduction_scenario(grid=(64, 64), c: float = 0.3, order: int = 3) -> ReductionScenario:
    return ReductionScenario(make_surface("torus", 1.0, grid), c, order)


# -- restriction monotonicity ----------------------------------------------------


def restriction_check(c_small: float = 0.2, c_big: float = 0.3, grid=(128, 128), theta=None) -> ConsistencyReport:
    """A partition on the inner disks of capacity c' read for capacity c: identical pb."""
    T = make_surface("torus", 1.0, grid)
    small = lattice_cover(T, c_small)
    fam = PartitionFamily(small)
    specs = fam.specs(fam.default if theta is None else theta)
    p_small = pb_of_partition(normalized_partition(small, specs)).value
    big = enlarge(small, c_big)
    p_big = pb_of_partition(normalized_partition(big, specs)).value
    out = ConsistencyReport()
    out.add("restriction-identity", p_small, p_big, p_small == p_big, f"c'={c_small} c={c_big}")
    return out


# -- scenario catalogue ------------------------------------------------------------


def shipped_scenarios(grid_torus=(128, 128), grid_sphere=(256, 128)) -> dict:
    """Cover builders for every shipped scenario (name -> zero-argument callable)."""
    T = lambda: make_surface("torus", 1.0, grid_torus)  # noqa: E731
    S = lambda: make_surface("sphere", 4 * math.pi, grid_sphere)  # noqa: E731
    return {
        "torus-3disk": lambda: three_disk_torus(grid_torus),
        "torus-2band": lambda: (lambda t: cv.DiscreteCover(t, [cv.band_embedding(t, "h", 0.25, 0.6),
                                                                cv.band_embedding(t, "h", 0.75, 0.6)]))(T()),
        "torus-2row": lambda: two_row_torus(grid_torus),
        "torus-lattice-0.15": lambda: lattice_cover(T(), 0.15),
        "torus-lattice-0.45": lambda: lattice_cover(T(), 0.45),
        "torus-square-T": lambda: _square_cover(make_surface("torus", 1.0, (64, 64)), 0.3, 8, cv.DEFAULT_ETA)[0],
        "sphere-tetra": lambda: solid_cover(S(), 4, 1.5 * math.pi),
        "sphere-5cap": lambda: solid_cover(S(), 5, 1.4 * math.pi),
        "sphere-octa": lambda: solid_cover(S(), 6, math.pi),
        "sphere-half-area": lambda: solid_cover(S(), 2, 2.2 * math.pi, eta=0.05),
        "plane-single": lambda: cv.make_continuous_cover(make_surface("plane", 1.0, (64, 64)), [(0.5, 0.5)], 1.0, 4),
    }


def normalization_suite(scenarios: dict | None = None) -> ConsistencyReport:
    out = ConsistencyReport()
    for name, build in (scenarios or shipped_scenarios()).items():
        t0 = time.perf_counter()
        cov = build()
        dev = verify_partition(canonical_partition(cov)).max_deviation
        out.add(f"normalization-{name}", 1e-10, dev, dev < 1e-10, f"{time.perf_counter() - t0:.2f}s")
    return out


__all__ = [
    "OptimizerConfig", "MinimizeResult", "minimize_pb", "lattice_k", "lattice_cover", "solid_cover",
    "cap_cover", "sphere_template", "cover_template", "SweepRow", "SweepTable", "pb_curve_sweep",
    "restricted_pb", "row_partition", "monotonicity_report", "emit_plot_data", "CheckRecord", "ConsistencyReport",
    "polterovich_consistency", "coarse_polterovich", "random_two_set_covers", "two_set_vanishing",
    "half_area_vanishing", "polterovich_suite", "three_disk_torus", "two_row_torus", "two_row_partition", "mt_refinement",
    "correspondence_check", "two_row_coarse_check", "ReductionScenario", "reduction_check", "bicover_for",
    "default_reduction_scenario", "restriction_check", "shipped_scenarios", "normalization_suite",
    "random_rotation",
]
