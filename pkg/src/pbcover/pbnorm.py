"""Box suprema of weighted Poisson brackets.

For a partition ``F_1..F_N`` with quadrature weights ``w`` the bracket
matrix at a grid point is

    P_ij(x) = w_i w_j {F_i, F_j}(x) = U_i V_j - V_i U_j,
    U = w * dF/dx,  V = w * dF/dy,

and the pointwise problem ``sup_{a,b in [-1,1]^N} |a^T P b|`` is the
inf-to-one norm ``max_{a in {+-1}^N} ||a^T P||_1``.  Three evaluators are
available:

``enum``
    Gray-code enumeration over the active slices (exact, N <= n_exact);
``zonotope``
    rank-two walk over the vertices of ``{sum a_i g_i}``, ``g_i = (U_i, V_i)``
    (exact, any N);
``heuristic``
    alternating sign ascent with seeded restarts (a lower bound).

``auto`` enumerates small active sets and walks the zonotope otherwise.
The compiled kernels are used when available; set ``PBCOVER_PURE=1`` to
force the numpy versions.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _fallback
from .partition import Partition, normalized_partition

METHODS = ("auto", "enum", "zonotope", "heuristic")
_MODE = {"enum": 0, "zonotope": 1, "heuristic": 2, "auto": 3}


class PbError(ValueError):
    pass


def _load_backend(pure: bool | None = None):
    if pure is None:
        pure = bool(os.environ.get("PBCOVER_PURE"))
    if not pure:
        try:
            from . import _core

            return _core, "cython"
        except ImportError:
            pass
    return _fallback, "python"


_backend, BACKEND = _load_backend()


def set_backend(name: str) -> str:
    """Switch kernels at runtime ("cython" or "python"); returns the active name."""
    global _backend, BACKEND
    if name not in ("cython", "python"):
        raise PbError(f"unknown backend {name!r}")
    _backend, BACKEND = _load_backend(pure=(name == "python"))
    if BACKEND != name:
        raise PbError("compiled kernels are not available")
    return BACKEND


def _sign(x):
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int8)


# -- dense matrices ----------------------------------------------------------


def _check_square(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise PbError(f"expected a square matrix, got shape {P.shape}")
    return P


def inf1_norm_exact(P, n_exact: int = 16):
    """Exact ``max_{a,b in [-1,1]^N} |a^T P b|`` with sign witnesses."""
    P = _check_square(P)
    if P.shape[0] > n_exact:
        raise PbError(f"N={P.shape[0]} exceeds the exact threshold {n_exact}; use the heuristic")
    val, a = _backend.enum_dense(P)
    a = np.asarray(a, dtype=np.int8)
    return float(val), a, _sign(a @ P)


def inf1_norm_heuristic(P, restarts: int = 32, seed: int = 0, warm=None):
    """Alternating sign ascent; a lower bound on the exact value."""
    if restarts < 1:
        raise PbError("restarts must be >= 1")
    P = _check_square(P)
    if P.shape[0] == 0:
        return 0.0, np.zeros(0, np.int8), np.zeros(0, np.int8)
    val, a = _fallback.heuristic_dense(P, restarts, seed, warm)
    return float(val), a, _sign(a @ P)


def rank2_norm(u, v):
    """Exact box supremum of ``P = u v^T - v u^T`` by the zonotope walk."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    act = np.flatnonzero((u != 0) | (v != 0))
    a = np.ones(u.size, dtype=np.int8)
    if act.size == 0:
        return 0.0, a, a.copy()
    val, aa = _fallback.zonotope_point(u[act], v[act])
    a[act] = aa
    A = np.array([a @ u, a @ v])
    return float(val), a, _sign(A[0] * v - A[1] * u)


# -- bracket matrix field ----------------------------------------------------


def _on_chart(partition: Partition, chart) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the partition slices evaluated on another chart."""
    if partition.parent is not None:
        parent, C = partition.parent
        pgx, pgy = _on_chart(parent, chart)
        return np.tensordot(C, pgx, axes=1), np.tensordot(C, pgy, axes=1)
    if partition.specs is None or partition.cover is None or not partition.provenance.get("op", "").startswith(
        ("normalized", "canonical", "parametric")
    ):
        raise PbError("partition cannot be re-evaluated on the second sphere chart")
    other = normalized_partition(partition.cover, _all_specs(partition), chart)
    gx = np.zeros((partition.n,) + chart.shape)
    gy = np.zeros_like(gx)
    pos = {int(t): k for k, t in enumerate(other.t_index)}
    for k, t in enumerate(partition.t_index):
        j = pos.get(int(t))
        if j is not None:
            gx[k], gy[k] = other.gx[j], other.gy[j]
    return gx, gy


def _all_specs(partition: Partition):
    if partition.kind == "discrete":
        return partition.specs
    # sparse continuous partitions only keep non-zero slices; rebuild the
    # full list with zero-amplitude placeholders
    from dataclasses import replace

    full = [None] * partition.n_t
    for k, t in enumerate(partition.t_index):
        full[t] = partition.specs[k]
    filler = partition.specs[0]
    return [s if s is not None else replace(filler, amplitude=0.0) for s in full]


@dataclass
class BracketMatrixField:
    """Rank-two factors of the bracket matrices at every evaluated point."""

    U: np.ndarray  # (npts, n)
    V: np.ndarray
    chart: np.ndarray  # (npts,) chart index into ``charts``
    index: np.ndarray  # (npts,) flat grid index within the chart
    charts: list
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.U.shape[1]

    @property
    def npts(self) -> int:
        return self.U.shape[0]

    def matrix(self, p: int) -> np.ndarray:
        """Dense P at evaluated point ``p``; upper triangle computed, then reflected."""
        u, v = self.U[p], self.V[p]
        M = np.triu(np.outer(u, v) - np.outer(v, u), 1)
        return M - M.T

    def entry(self, i: int, j: int, chart: int = 0) -> np.ndarray:
        """P_ij as a grid array on ``charts[chart]`` (zero where not evaluated)."""
        c = self.charts[chart]
        out = np.zeros(c.nx * c.ny)
        sel = self.chart == chart
        out[self.index[sel]] = self.U[sel, i] * self.V[sel, j] - self.V[sel, i] * self.U[sel, j]
        return out.reshape(c.shape)

    def antisymmetry_residual(self, sample: int = 64) -> float:
        idx = np.linspace(0, self.npts - 1, min(sample, self.npts)).astype(int)
        return max((float(np.abs(self.matrix(p) + self.matrix(p).T).max()) for p in idx), default=0.0)

    def bounds(self) -> np.ndarray:
        """Cheap upper bounds of the pointwise norm, used for pruning."""
        g = np.hypot(self.U, self.V).sum(axis=1)
        l1 = 2.0 * np.abs(self.U).sum(axis=1) * np.abs(self.V).sum(axis=1)
        return np.minimum(g * g, l1) * (1 + 1e-12) + 1e-300

    def point(self, p: int) -> tuple[int, np.ndarray]:
        c = self.charts[self.chart[p]]
        return int(self.chart[p]), c.points()[self.index[p]]


def bracket_matrix(partition: Partition) -> BracketMatrixField:
    s = partition.surface
    n = partition.n
    if partition.fields.shape[1:] != s.shape or partition.gx.shape != partition.fields.shape:
        raise PbError("partition arrays do not match the surface grid")
    charts = s.atlas()
    Us, Vs, cs, ix = [], [], [], []
    for ci, chart in enumerate(charts):
        if ci == 0:
            gx, gy = partition.gx, partition.gy
        else:
            try:
                gx, gy = _on_chart(partition, chart)
            except PbError:
                band = ~s.valid_mask()
                if np.abs(partition.gx[:, band]).max(initial=0) > 1e-9 or np.abs(partition.gy[:, band]).max(initial=0) > 1e-9:
                    raise PbError("partition varies inside the polar band and has no second-chart evaluation")
                continue
        mask = chart.valid_mask().ravel()
        sel = np.flatnonzero(mask)
        w = partition.weights[:, None]
        Us.append((w * gx.reshape(n, -1)[:, sel]).T)
        Vs.append((w * gy.reshape(n, -1)[:, sel]).T)
        cs.append(np.full(sel.size, ci))
        ix.append(sel)
    U = np.ascontiguousarray(np.concatenate(Us)) if n else np.zeros((sum(map(len, ix)), 0))
    V = np.ascontiguousarray(np.concatenate(Vs)) if n else np.zeros_like(U)
    return BracketMatrixField(U, V, np.concatenate(cs), np.concatenate(ix), charts, partition.weights.copy())


# -- partition-level evaluation -------------------------------------------------


@dataclass
class PbConfig:
    n_exact: int = 16
    restarts: int = 32
    seed: int = 0
    threads: int = 1


@dataclass
class PbReport:
    value: float
    a: np.ndarray
    b: np.ndarray
    point: tuple[float, float]
    chart: int
    point_index: int
    method: str
    n: int
    npts: int
    backend: str
    seconds: float
    t_index: np.ndarray = field(default_factory=lambda: np.zeros(0, int))
    zero_witness: float | None = None  # max |P_ij| over the grid, filled when value == 0

    def recompute(self, bmf: BracketMatrixField) -> float:
        """|a^T P(x*) b| from the stored witnesses."""
        if self.n == 0:
            return 0.0
        p = int(np.flatnonzero((bmf.chart == self.chart) & (bmf.index == self.point_index))[0])
        u, v = bmf.U[p], bmf.V[p]
        A = np.array([self.a @ u, self.a @ v], dtype=float)
        return float(abs(self.b @ (A[0] * v - A[1] * u)))

    def to_dict(self) -> dict:
        return {
            "value": float(self.value),
            "method": self.method,
            "N": int(self.n),
            "points": int(self.npts),
            "argmax": {"chart": int(self.chart), "point": [float(x) for x in self.point],
                       "grid_index": int(self.point_index)},
            "a": [int(x) for x in self.a],
            "b": [int(x) for x in self.b],
            "t_index": [int(x) for x in self.t_index],
            "backend": self.backend,
            "zero_witness": self.zero_witness,
        }

    def to_json(self) -> str:
        from .io import dumps

        return dumps(self.to_dict())


def field_sup(bmf: BracketMatrixField, method: str = "auto", config: PbConfig | None = None, warm_start=None):
    """(value, point position, a) maximized over all evaluated points."""
    config = config or PbConfig()
    if method not in METHODS:
        raise PbError(f"unknown method {method!r}; choose from {METHODS}")
    if bmf.n == 0 or bmf.npts == 0:
        return 0.0, 0, np.zeros(bmf.n, dtype=np.int8)
    if method == "enum":
        active = ((bmf.U != 0) | (bmf.V != 0)).sum(axis=1).max()
        if active > config.n_exact:
            raise PbError(f"{active} active slices exceed the exact threshold {config.n_exact}")
    bounds = bmf.bounds()
    order = np.argsort(-bounds, kind="stable").astype(np.int64)
    warm = None if warm_start is None else np.asarray(warm_start, dtype=float)
    threads = max(1, int(config.threads))
    args = (bmf.U, bmf.V)
    rest = (bounds, _MODE[method], config.n_exact, config.restarts, config.seed & ((1 << 64) - 1), warm)

    def run(k):
        chunk = np.ascontiguousarray(order[k::threads])
        val, pos, a = _backend.field_max(*args, chunk, *rest)
        return val, k + pos * threads, np.asarray(a, dtype=np.int8)

    if threads == 1:
        results = [run(0)]
    else:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, range(threads)))
    # deterministic reduction: largest value, then earliest position in `order`
    val, gpos, a = max(results, key=lambda r: (r[0], -r[1]))
    return max(float(val), 0.0), int(order[gpos]), a


def pb_of_partition(partition: Partition, method: str = "auto", config: PbConfig | None = None,
                    warm_start=None, bmf: BracketMatrixField | None = None) -> PbReport:
    """Max over grid points of the box supremum of the bracket matrix."""
    config = config or PbConfig()
    t0 = time.perf_counter()
    bmf = bmf if bmf is not None else bracket_matrix(partition)
    val, p, a = field_sup(bmf, method, config, warm_start)
    if bmf.npts:
        u, v = bmf.U[p], bmf.V[p]
        A = np.array([a @ u, a @ v], dtype=float)
        b = _sign(A[0] * v - A[1] * u)
        chart, pt = bmf.point(p)
        idx = int(bmf.index[p])
    else:
        b, chart, pt, idx = a.copy(), 0, np.zeros(2), 0
    tag = f"heuristic(restarts={config.restarts})" if method == "heuristic" else (
        "exact" if method == "enum" else f"exact-{method}")
    rep = PbReport(val, a, b, (float(pt[0]), float(pt[1])), chart, idx, tag, bmf.n, bmf.npts, BACKEND,
                   time.perf_counter() - t0, partition.t_index.copy())
    if val == 0.0:
        rep.zero_witness = max_abs_entry(bmf)
    return rep


def max_abs_entry(bmf: BracketMatrixField, chunk: int = 4096) -> float:
    """max over points and pairs of |P_ij|; zero certifies P == 0 on the grid."""
    best = 0.0
    for s in range(0, bmf.npts, chunk):
        U, V = bmf.U[s:s + chunk], bmf.V[s:s + chunk]
        if bmf.n:
            P = U[:, :, None] * V[:, None, :] - V[:, :, None] * U[:, None, :]
            best = max(best, float(np.abs(P).max()))
    return best


# -- weight correspondences ------------------------------------------------------


def weight_correspondence_residual(continuous: Partition, discrete: Partition, r, a_prime) -> float:
    """sup |sum_j a'_j F'_j - sum_s w_s alpha_s F_s| with alpha_s = a'_{r(block(s))}."""
    prov = discrete.provenance
    if prov.get("op") != "coarse_grain" or prov.get("source") != continuous.token:
        raise PbError("discrete partition was not produced by coarse_grain from this continuous partition")
    r = np.asarray(r)
    a_prime = np.asarray(a_prime, dtype=float)
    if a_prime.shape != (discrete.n,):
        raise PbError(f"a' must have {discrete.n} entries")
    lhs = np.tensordot(a_prime, discrete.fields, axes=1)
    alpha = a_prime[r[continuous.t_index // prov["block"]]]
    rhs = np.tensordot(alpha * continuous.weights, continuous.fields, axes=1)
    return float(np.max(np.abs(lhs - rhs)))


def window_weight_residual(continuous: Partition, discrete: Partition, alpha) -> float:
    """Residual of the window correspondence for a spread-out discrete partition.

    ``alpha`` is a piecewise-constant I-weight on the t-grid (length n_t); the
    discrete weight is ``a'_k = (3(n+1)/2) * integral of alpha over window k``.
    """
    prov = continuous.provenance
    if prov.get("op") != "continuous_from_discrete" or prov.get("source") != discrete.token:
        raise PbError("continuous partition was not produced from this discrete partition")
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (continuous.n_t,):
        raise PbError(f"alpha must have {continuous.n_t} entries")
    n, q = prov["n"], prov["q"]
    M = continuous.n_t
    a_prime = np.array([1.5 * (n + 1) * alpha[(3 * k - 1) * q:(3 * k + 1) * q].sum() / M for k in range(1, n + 1)])
    lhs = np.tensordot(a_prime, discrete.fields, axes=1)
    rhs = np.tensordot(alpha[continuous.t_index] * continuous.weights, continuous.fields, axes=1)
    return float(np.max(np.abs(lhs - rhs)))


def report_json(report: PbReport) -> str:
    return json.dumps(report.to_dict())
