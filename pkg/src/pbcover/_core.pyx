# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the box supremum of bracket matrices.

Mirrors :mod:`pbcover._fallback`.  The pointwise loops run without the GIL
so callers may split the grid across threads.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, atan2
from libc.stdlib cimport malloc, free, qsort
from libc.string cimport memcpy
from libc.stdint cimport uint64_t

cnp.import_array()

cdef enum:
    MODE_ENUM = 0
    MODE_ZONOTOPE = 1
    MODE_HEURISTIC = 2
    MODE_AUTO = 3
    AUTO_ENUM_MAX = 8

ctypedef struct Key:
    double ang
    int idx


cdef int _cmp(const void* x, const void* y) noexcept nogil:
    cdef const Key* a = <const Key*>x
    cdef const Key* b = <const Key*>y
    if a.ang < b.ang:
        return -1
    if a.ang > b.ang:
        return 1
    return a.idx - b.idx


cdef inline uint64_t _splitmix(uint64_t x) noexcept nogil:
    x = x + <uint64_t>0x9E3779B97F4A7C15ULL
    x = (x ^ (x >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    x = (x ^ (x >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return x ^ (x >> 31)


cdef inline signed char _sgn(double x) noexcept nogil:
    return 1 if x >= 0 else -1


cdef inline double _objective(double Au, double Av, const double* u, const double* v, int m) noexcept nogil:
    cdef double s = 0
    cdef int j
    for j in range(m):
        s += fabs(Au * v[j] - Av * u[j])
    return s


cdef double _zonotope(const double* u, const double* v, int m, signed char* a, Key* keys,
                      signed char* flip) noexcept nogil:
    cdef int i, k, bestk = 0
    cdef double uf, vf, pu = 0, pv = 0, val, best = -1, Au = 0, Av = 0
    for i in range(m):
        uf = u[i]
        vf = v[i]
        flip[i] = 1 if (vf < 0 or (vf == 0 and uf < 0)) else 0
        if flip[i]:
            uf = -uf
            vf = -vf
        keys[i].ang = atan2(vf, uf)
        keys[i].idx = i
        pu -= uf
        pv -= vf
    qsort(keys, m, sizeof(Key), _cmp)
    for k in range(m):
        val = _objective(pu, pv, u, v, m)
        if val > best:
            best = val
            bestk = k
        i = keys[k].idx
        if flip[i]:
            pu -= 2 * u[i]
            pv -= 2 * v[i]
        else:
            pu += 2 * u[i]
            pv += 2 * v[i]
    for k in range(m):
        i = keys[k].idx
        a[i] = 1 if k < bestk else -1
        if flip[i]:
            a[i] = -a[i]
        Au += a[i] * u[i]
        Av += a[i] * v[i]
    return _objective(Au, Av, u, v, m)


cdef double _enum(const double* P, int m, signed char* a, signed char* cur, double* r) noexcept nogil:
    cdef int i, j
    cdef long k, top
    cdef double val, best
    for j in range(m):
        r[j] = 0
        cur[j] = 1
    for i in range(m):
        for j in range(m):
            r[j] += P[i * m + j]
    best = 0
    for j in range(m):
        best += fabs(r[j])
    memcpy(a, cur, m)
    top = (<long>1) << (m - 1)
    for k in range(1, top):
        i = 1
        while not (k & ((<long>1) << (i - 1))):
            i += 1
        cur[i] = -cur[i]
        val = 0
        for j in range(m):
            r[j] = r[j] + 2.0 * cur[i] * P[i * m + j]
            val += fabs(r[j])
        if val > best:
            best = val
            memcpy(a, cur, m)
    return best


cdef double _heuristic(const double* u, const double* v, int m, int restarts, uint64_t seed,
                       uint64_t point, const signed char* warm, signed char* a, signed char* cur,
                       signed char* b) noexcept nogil:
    cdef int rs, it, i, j, bi
    cdef double Au, Av, Bu, Bv, val, cand, cbest, cu, cv, best = -1
    cdef uint64_t key
    cdef bint changed
    for rs in range(restarts):
        if rs == 0:
            for i in range(m):
                cur[i] = 1 if warm == NULL else warm[i]
        else:
            key = _splitmix(_splitmix(_splitmix(seed) ^ point) ^ <uint64_t>rs)
            for i in range(m):
                cur[i] = 1 if (_splitmix(key ^ <uint64_t>i) >> 63) == 0 else -1
        for it in range(100):
            Au = 0
            Av = 0
            for i in range(m):
                Au += cur[i] * u[i]
                Av += cur[i] * v[i]
            Bu = 0
            Bv = 0
            for j in range(m):
                b[j] = _sgn(Au * v[j] - Av * u[j])
                Bu += b[j] * u[j]
                Bv += b[j] * v[j]
            changed = False
            for i in range(m):
                j = _sgn(u[i] * Bv - v[i] * Bu)
                if j != cur[i]:
                    changed = True
                    cur[i] = j
            if not changed:
                break
        Au = 0
        Av = 0
        for i in range(m):
            Au += cur[i] * u[i]
            Av += cur[i] * v[i]
        val = _objective(Au, Av, u, v, m)
        while True:
            cbest = -1
            bi = -1
            for i in range(m):
                cu = Au - 2.0 * cur[i] * u[i]
                cv = Av - 2.0 * cur[i] * v[i]
                cand = _objective(cu, cv, u, v, m)
                if cand > cbest:
                    cbest = cand
                    bi = i
            if cbest <= val * (1 + 1e-14):
                break
            cur[bi] = -cur[bi]
            Au = 0
            Av = 0
            for i in range(m):
                Au += cur[i] * u[i]
                Av += cur[i] * v[i]
            val = _objective(Au, Av, u, v, m)
        if val > best:
            best = val
            memcpy(a, cur, m)
    return best if best > 0 else 0.0


def enum_dense(P):
    cdef double[:, ::1] Pm = np.ascontiguousarray(P, dtype=np.float64)
    cdef int m = Pm.shape[0]
    a = np.ones(m, dtype=np.int8)
    if m == 0:
        return 0.0, a
    cdef signed char[::1] av = a
    cur = np.empty(m, dtype=np.int8)
    cdef signed char[::1] cv = cur
    r = np.empty(m)
    cdef double[::1] rv = r
    cdef double val
    with nogil:
        val = _enum(&Pm[0, 0], m, &av[0], &cv[0], &rv[0])
    return val, a


def field_max(double[:, ::1] U, double[:, ::1] V, cnp.int64_t[::1] order, double[::1] bounds,
              int mode, int n_exact, int restarts, uint64_t seed, warm=None):
    """See :func:`pbcover._fallback.field_max`."""
    cdef Py_ssize_t npts = order.shape[0]
    cdef int n = U.shape[1]
    cdef Py_ssize_t pos, p, bpos = -1
    cdef int i, m
    cdef double best = -1, val
    cdef bint has_warm = warm is not None
    wa = np.ones(n, dtype=np.int8) if warm is None else np.where(np.asarray(warm) >= 0, 1, -1).astype(np.int8)
    cdef signed char[::1] wv = wa
    besta = np.ones(n, dtype=np.int8)
    cdef signed char[::1] ba = besta
    cdef int* act = <int*>malloc(n * sizeof(int))
    cdef double* u = <double*>malloc(n * sizeof(double))
    cdef double* v = <double*>malloc(n * sizeof(double))
    cdef double* P = <double*>malloc((n_exact if n_exact > 0 else 1) * (n_exact if n_exact > 0 else 1) * sizeof(double))
    cdef double* r = <double*>malloc(n * sizeof(double))
    cdef signed char* a = <signed char*>malloc(n)
    cdef signed char* cur = <signed char*>malloc(n)
    cdef signed char* b = <signed char*>malloc(n)
    cdef signed char* wl = <signed char*>malloc(n)
    cdef Key* keys = <Key*>malloc(n * sizeof(Key))
    cdef int j
    try:
        with nogil:
            for pos in range(npts):
                p = order[pos]
                if bounds[p] <= best:
                    break
                m = 0
                for i in range(n):
                    if U[p, i] != 0 or V[p, i] != 0:
                        act[m] = i
                        u[m] = U[p, i]
                        v[m] = V[p, i]
                        wl[m] = wv[i]
                        m += 1
                if m == 0:
                    val = 0
                elif m <= n_exact and (mode == MODE_ENUM or (mode == MODE_AUTO and m <= AUTO_ENUM_MAX)):
                    for i in range(m):
                        for j in range(m):
                            P[i * m + j] = u[i] * v[j] - v[i] * u[j]
                    val = _enum(P, m, a, cur, r)
                elif mode == MODE_HEURISTIC:
                    val = _heuristic(u, v, m, restarts, seed, <uint64_t>p,
                                     wl if has_warm else NULL, a, cur, b)
                else:
                    val = _zonotope(u, v, m, a, keys, cur)
                if val > best:
                    best = val
                    bpos = pos
                    for i in range(n):
                        ba[i] = 1
                    for i in range(m):
                        ba[act[i]] = a[i]
    finally:
        free(act); free(u); free(v); free(P); free(r); free(a); free(cur); free(b); free(wl); free(keys)
    return best, bpos, besta
