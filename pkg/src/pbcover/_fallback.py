"""Pure numpy kernels.  Same signatures and results as the compiled core.

Pointwise problems have rank two: with generators ``g_i = (U_i, V_i)``,
``P_ij = U_i V_j - V_i U_j`` and ``(a^T P)_j = A x g_j`` where
``A = sum_i a_i g_i``.  The zonotope method walks the vertices of
``{sum a_i g_i : |a_i| <= 1}`` in angular order.
"""

from __future__ import annotations

import numpy as np

MODE_ENUM, MODE_ZONOTOPE, MODE_HEURISTIC, MODE_AUTO = 0, 1, 2, 3
AUTO_ENUM_MAX = 8  # auto mode enumerates small active sets, walks the zonotope otherwise
_M64 = (1 << 64) - 1
_C1, _C2, _C3 = 0x9E3779B97F4A7C15, 0xBF58476D1CE4E5B9, 0x94D049BB133111EB


def _splitmix(x: int) -> int:
    x = (x + _C1) & _M64
    x = ((x ^ (x >> 30)) * _C2) & _M64
    x = ((x ^ (x >> 27)) * _C3) & _M64
    return x ^ (x >> 31)


def random_signs(seed: int, point: int, restart: int, m: int) -> np.ndarray:
    """Counter-based signs, identical across backends and thread layouts."""
    key = _splitmix(_splitmix(_splitmix(seed & _M64) ^ point) ^ restart)
    return np.array([1 if _splitmix(key ^ i) >> 63 == 0 else -1 for i in range(m)], dtype=np.int8)


def _sign(x):
    return np.where(x >= 0, 1, -1).astype(np.int8)


# -- dense matrices ----------------------------------------------------------


def enum_dense(P: np.ndarray):
    """Gray-code enumeration of a in {+-1}^m with a_0 = +1."""
    P = np.asarray(P, dtype=float)
    m = P.shape[0]
    if m == 0:
        return 0.0, np.zeros(0, dtype=np.int8)
    a = np.ones(m, dtype=np.int8)
    r = P.sum(axis=0)
    best = float(np.abs(r).sum())
    besta = a.copy()
    for k in range(1, 1 << (m - 1)):
        i = (k & -k).bit_length()  # flip index 1..m-1
        a[i] = -a[i]
        r = r + 2.0 * a[i] * P[i]
        v = float(np.abs(r).sum())
        if v > best:
            best, besta = v, a.copy()
    return best, besta


def heuristic_dense(P: np.ndarray, restarts: int, seed: int, warm=None):
    P = np.asarray(P, dtype=float)
    m = P.shape[0]
    best, besta = -1.0, np.ones(m, dtype=np.int8)
    for rs in range(restarts):
        if rs == 0:
            a = np.ones(m, dtype=np.int8) if warm is None else _sign(np.asarray(warm, dtype=float))
        else:
            a = random_signs(seed, 0, rs, m)
        v, a = _ascent_dense(P, a)
        if v > best:
            best, besta = v, a
    return max(best, 0.0), besta


def _ascent_dense(P, a):
    for _ in range(100):
        b = _sign(a @ P)
        a2 = _sign(P @ b)
        if np.array_equal(a2, a):
            break
        a = a2
    r = a @ P
    val = float(np.abs(r).sum())
    while True:
        # single-flip polish on the exact objective ||a^T P||_1
        cand = np.abs(r[None, :] - 2.0 * a[:, None] * P).sum(axis=1)
        i = int(np.argmax(cand))
        if cand[i] <= val * (1 + 1e-14):
            return val, a.copy()
        a = a.copy()
        a[i] = -a[i]
        r = a @ P
        val = float(np.abs(r).sum())


# -- rank-two pointwise kernels -------------------------------------------


def _objective(Au, Av, u, v):
    return float(np.abs(Au * v - Av * u).sum())


def zonotope_point(u: np.ndarray, v: np.ndarray):
    m = u.size
    flip = (v < 0) | ((v == 0) & (u < 0))
    uf = np.where(flip, -u, u)
    vf = np.where(flip, -v, v)
    order = np.argsort(np.arctan2(vf, uf), kind="stable")
    gu, gv = uf[order], vf[order]
    pu = -gu.sum() + 2.0 * np.concatenate([[0.0], np.cumsum(gu)[:-1]])
    pv = -gv.sum() + 2.0 * np.concatenate([[0.0], np.cumsum(gv)[:-1]])
    vals = np.abs(pu[:, None] * v[None, :] - pv[:, None] * u[None, :]).sum(axis=1)
    k = int(np.argmax(vals))
    eps = np.where(np.arange(m) < k, 1, -1)
    a = np.empty(m, dtype=np.int8)
    a[order] = eps
    a = np.where(flip, -a, a).astype(np.int8)
    Au, Av = float(a @ u), float(a @ v)
    return _objective(Au, Av, u, v), a


def enum_point(u: np.ndarray, v: np.ndarray):
    P = np.outer(u, v) - np.outer(v, u)
    return enum_dense(P)


def heuristic_point(u, v, restarts, seed, point, warm=None):
    m = u.size
    best, besta = -1.0, np.ones(m, dtype=np.int8)
    for rs in range(restarts):
        if rs == 0:
            a = np.ones(m, dtype=np.int8) if warm is None else warm.copy()
        else:
            a = random_signs(seed, point, rs, m)
        for _ in range(100):
            Au, Av = float(a @ u), float(a @ v)
            b = _sign(Au * v - Av * u)
            Bu, Bv = float(b @ u), float(b @ v)
            a2 = _sign(u * Bv - v * Bu)
            if np.array_equal(a2, a):
                break
            a = a2
        Au, Av = float(a @ u), float(a @ v)
        val = _objective(Au, Av, u, v)
        while True:
            cu = Au - 2.0 * a * u
            cv = Av - 2.0 * a * v
            cand = np.abs(cu[:, None] * v[None, :] - cv[:, None] * u[None, :]).sum(axis=1)
            i = int(np.argmax(cand))
            if cand[i] <= val * (1 + 1e-14):
                break
            a = a.copy()
            a[i] = -a[i]
            Au, Av = float(a @ u), float(a @ v)
            val = _objective(Au, Av, u, v)
        if val > best:
            best, besta = val, a.copy()
    return max(best, 0.0), besta


def field_max(U, V, order, bounds, mode, n_exact, restarts, seed, warm=None):
    """Max over the points in ``order`` of the pointwise box supremum.

    Points are visited in the given order; a point is skipped once its
    upper bound cannot beat the incumbent.  Returns ``(value, position in
    order, a over all n slices)``; ties keep the earliest position.
    """
    n = U.shape[1]
    best, bpos = -1.0, -1
    ba = np.ones(n, dtype=np.int8)
    for pos, p in enumerate(order):
        if bounds[p] <= best:
            break
        u, v = U[p], V[p]
        act = np.flatnonzero((u != 0) | (v != 0))
        m = act.size
        if m == 0:
            val, a = 0.0, np.zeros(0, dtype=np.int8)
        elif m <= n_exact and (mode == MODE_ENUM or (mode == MODE_AUTO and m <= AUTO_ENUM_MAX)):
            val, a = enum_point(u[act], v[act])
        elif mode == MODE_HEURISTIC:
            w = None if warm is None else _sign(warm[act].astype(float))
            val, a = heuristic_point(u[act], v[act], restarts, seed, int(p), w)
        else:
            val, a = zonotope_point(u[act], v[act])
        if val > best:
            best, bpos = val, pos
            ba = np.ones(n, dtype=np.int8)
            ba[act] = a
    return best, bpos, ba
