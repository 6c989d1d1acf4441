# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_pure.py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt, isfinite
from libc.stdint cimport uint32_t, uint64_t, int64_t
from scipy.special.cython_special cimport ndtri

cnp.import_array()

cdef uint64_t M0 = 0xD2511F53
cdef uint64_t M1 = 0xCD9E8D57
cdef uint32_t W0 = 0x9E3779B9
cdef uint32_t W1 = 0xBB67AE85
cdef double TWO_M53 = 1.1102230246251565e-16


cdef inline void _philox(uint32_t* c, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t a0, a1, a2, a3
    cdef int r
    for r in range(10):
        if r:
            k0 = k0 + W0
            k1 = k1 + W1
        p0 = M0 * <uint64_t>c[0]
        p1 = M1 * <uint64_t>c[2]
        a0 = <uint32_t>(p1 >> 32) ^ c[1] ^ k0
        a1 = <uint32_t>p1
        a2 = <uint32_t>(p0 >> 32) ^ c[3] ^ k1
        a3 = <uint32_t>p0
        c[0] = a0
        c[1] = a1
        c[2] = a2
        c[3] = a3


cdef inline double _uniform(uint32_t k0, uint32_t k1, uint32_t c0, uint32_t c1,
                            uint32_t c2, uint32_t c3) noexcept nogil:
    cdef uint32_t c[4]
    c[0] = c0
    c[1] = c1
    c[2] = c2
    c[3] = c3
    _philox(c, k0, k1)
    cdef uint64_t bits = ((<uint64_t>c[0] << 32) | <uint64_t>c[1]) >> 11
    return (<double>bits + 0.5) * TWO_M53


def philox4x32(ctr, key):
    cdef cnp.uint32_t[:, ::1] cv = np.ascontiguousarray(ctr, dtype=np.uint32).copy()
    cdef uint32_t k0 = <uint32_t>(int(key[0]) & 0xFFFFFFFF)
    cdef uint32_t k1 = <uint32_t>(int(key[1]) & 0xFFFFFFFF)
    cdef Py_ssize_t i
    for i in range(cv.shape[0]):
        _philox(&cv[i, 0], k0, k1)
    return np.asarray(cv)


def uniforms(key0, key1, c0, c1, c2, c3):
    arrs = np.broadcast_arrays(*(np.asarray(c, dtype=np.uint64) for c in (c0, c1, c2, c3)))
    shape = arrs[0].shape
    cdef cnp.uint64_t[::1] a0 = np.array(arrs[0], order="C").ravel()
    cdef cnp.uint64_t[::1] a1 = np.array(arrs[1], order="C").ravel()
    cdef cnp.uint64_t[::1] a2 = np.array(arrs[2], order="C").ravel()
    cdef cnp.uint64_t[::1] a3 = np.array(arrs[3], order="C").ravel()
    cdef Py_ssize_t n = a0.shape[0], i
    out = np.empty(n)
    cdef double[::1] ov = out
    cdef uint32_t k0 = <uint32_t>(int(key0) & 0xFFFFFFFF)
    cdef uint32_t k1 = <uint32_t>(int(key1) & 0xFFFFFFFF)
    for i in range(n):
        ov[i] = _uniform(k0, k1, <uint32_t>a0[i], <uint32_t>a1[i], <uint32_t>a2[i], <uint32_t>a3[i])
    return out.reshape(shape)


def arrivals(key0, key1, replicate, purpose_word, neurons, long block_lo, long block_hi,
             double rate, double t_end):
    cdef int64_t[::1] nv = np.ascontiguousarray(neurons, dtype=np.int64)
    cdef uint32_t k0 = <uint32_t>(int(key0) & 0xFFFFFFFF)
    cdef uint32_t k1 = <uint32_t>(int(key1) & 0xFFFFFFFF)
    cdef uint32_t rep = <uint32_t>(int(replicate) & 0xFFFFFFFF)
    cdef uint32_t pw = <uint32_t>(int(purpose_word) & 0xFFFFFFFF)
    cdef Py_ssize_t cap = 64, cnt = 0, ii
    cdef double[::1] tv = np.empty(cap)
    cdef int64_t[::1] wv = np.empty(cap, dtype=np.int64)
    cdef int64_t[::1] bv = np.empty(cap, dtype=np.int64)
    cdef int64_t[::1] dv = np.empty(cap, dtype=np.int64)
    cdef long b
    cdef int64_t i
    cdef uint32_t d
    cdef double t, stop, u
    for ii in range(nv.shape[0]):
        i = nv[ii]
        for b in range(block_lo, block_hi):
            t = <double>b
            stop = b + 1.0
            if t_end < stop:
                stop = t_end
            d = 0
            while True:
                u = _uniform(k0, k1, d, <uint32_t>i, pw | <uint32_t>b, rep)
                t = t - log(u) / rate
                if t >= stop:
                    break
                if cnt == cap:
                    cap *= 2
                    tv = np.resize(np.asarray(tv), cap)
                    wv = np.resize(np.asarray(wv), cap)
                    bv = np.resize(np.asarray(bv), cap)
                    dv = np.resize(np.asarray(dv), cap)
                tv[cnt] = t
                wv[cnt] = i
                bv[cnt] = b
                dv[cnt] = d
                cnt += 1
                d += 1
    return (np.asarray(tv)[:cnt].copy(), np.asarray(wv)[:cnt].copy(),
            np.asarray(bv)[:cnt].copy(), np.asarray(dv)[:cnt].copy())


cdef inline double _rate(double x, int kind, double fmin, double fmax) noexcept nogil:
    if kind == 0:
        return fmax
    if kind == 1:
        return fmin + (fmax - fmin) / (1.0 + x * x)
    if x < -700.0:
        return fmin
    return fmin + (fmax - fmin) / (1.0 + exp(-x))


def finite_events(times, neurons, z, u, x0, double alpha, double kick, int kind,
                  double fmin, double fmax, snap_times, Py_ssize_t watch):
    cdef double[::1] tv = np.ascontiguousarray(times, dtype=np.float64)
    cdef int64_t[::1] nv = np.ascontiguousarray(neurons, dtype=np.int64)
    cdef double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] sv = np.ascontiguousarray(snap_times, dtype=np.float64)
    cdef Py_ssize_t n = len(x0), ne = tv.shape[0], ns = sv.shape[0]
    cdef double[::1] c = np.array(x0, dtype=np.float64)
    cdef double[::1] r = np.zeros(n)
    acc = np.zeros(ne, dtype=bool)
    cdef cnp.npy_bool[::1] av = acc
    y_post_a = np.zeros(ne)
    cdef double[::1] yp = y_post_a
    watch_a = np.zeros(ne)
    cdef double[::1] wl = watch_a
    snaps_a = np.empty((ns, n))
    cdef double[:, ::1] snaps = snaps_a
    cdef double y = 0.0, ty = 0.0, s, ys, xi, yt, t
    cdef Py_ssize_t e, si = 0, i, j
    for e in range(ne):
        s = tv[e]
        while si < ns and sv[si] < s:
            t = sv[si]
            yt = y * exp(-alpha * (t - ty))
            for j in range(n):
                snaps[si, j] = yt + c[j] * exp(-alpha * (t - r[j]))
            si += 1
        i = nv[e]
        ys = y * exp(-alpha * (s - ty))
        xi = ys + c[i] * exp(-alpha * (s - r[i]))
        if not isfinite(xi):
            raise FloatingPointError("non-finite potential in finite system")
        if zv[e] <= _rate(xi, kind, fmin, fmax):
            av[e] = 1
            wl[e] = ys + c[watch] * exp(-alpha * (s - r[watch]))
            y = ys + uv[e] * kick
            ty = s
            c[i] = -y
            r[i] = s
            yp[e] = y
    while si < ns:
        t = sv[si]
        yt = y * exp(-alpha * (t - ty))
        for j in range(n):
            snaps[si, j] = yt + c[j] * exp(-alpha * (t - r[j]))
        si += 1
    return acc, y_post_a, watch_a, snaps_a


def aux_events(times, neurons, z, x0, double alpha, int kind, double fmin, double fmax,
               sub_t, sub_w, refresh):
    cdef double[::1] tv = np.ascontiguousarray(times, dtype=np.float64)
    cdef int64_t[::1] nv = np.ascontiguousarray(neurons, dtype=np.int64)
    cdef double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef double[::1] stv = np.ascontiguousarray(sub_t, dtype=np.float64)
    cdef double[::1] swv = np.ascontiguousarray(sub_w, dtype=np.float64)
    cdef cnp.uint8_t[::1] rf = np.ascontiguousarray(refresh, dtype=np.uint8)
    cdef Py_ssize_t n = len(x0), ne = tv.shape[0], nsub = stv.shape[0] - 1
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    states_a = np.empty((nsub + 1, n))
    cdef double[:, ::1] states = states_a
    sig_a = np.zeros(nsub if nsub > 0 else 0)
    cdef double[::1] sig = sig_a
    acc = np.zeros(ne, dtype=bool)
    cdef cnp.npy_bool[::1] av = acc
    cdef double[::1] reset_at = np.full(n, -1.0)
    cdef int64_t[::1] touched = np.empty(n if n > 0 else 1, dtype=np.int64)
    cdef Py_ssize_t nt, m, e = 0, i, j, k
    cdef double sigma = 0.0, t0, t1, w0, w1, h, dw, s, rt, base, ws, wr, xi, decay, tot
    for j in range(n):
        states[0, j] = x[j]
    for m in range(nsub):
        t0 = stv[m]
        t1 = stv[m + 1]
        w0 = swv[m]
        w1 = swv[m + 1]
        h = t1 - t0
        dw = w1 - w0
        if rf[m] or m == 0:
            tot = 0.0
            for j in range(n):
                tot += _rate(x[j], kind, fmin, fmax)
            sigma = sqrt(tot / n)
        sig[m] = sigma
        nt = 0
        while e < ne and tv[e] <= t1:
            s = tv[e]
            i = nv[e]
            if reset_at[i] >= 0.0:
                rt = reset_at[i]
                base = 0.0
            else:
                rt = t0
                base = x[i]
            ws = w0 + (s - t0) / h * dw
            wr = w0 + (rt - t0) / h * dw
            xi = base * exp(-alpha * (s - rt)) + sigma * (ws - wr)
            if not isfinite(xi):
                raise FloatingPointError("non-finite potential in auxiliary system")
            if zv[e] <= _rate(xi, kind, fmin, fmax):
                av[e] = 1
                if reset_at[i] < 0.0:
                    touched[nt] = i
                    nt += 1
                reset_at[i] = s
            e += 1
        decay = exp(-alpha * h)
        for j in range(n):
            x[j] = x[j] * decay + sigma * dw
        for k in range(nt):
            i = touched[k]
            wr = w0 + (reset_at[i] - t0) / h * dw
            x[i] = sigma * (w1 - wr)
            reset_at[i] = -1.0
        for j in range(n):
            states[m + 1, j] = x[j]
    return acc, states_a, sig_a


def dyadic_bridge(idx, tables, v, double b_top):
    cdef int64_t[::1] iv = np.ascontiguousarray(idx, dtype=np.int64)
    cdef double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t n = iv.shape[0] - 1
    out = np.zeros(n + 1)
    cdef double[::1] b = out
    if n == 0:
        return out
    b[n] = b_top
    cdef Py_ssize_t h = n // 2, lev = n.bit_length() - 2
    cdef Py_ssize_t nblocks, j, lft, top, q, lo, hi
    cdef int64_t s, a
    cdef double below, pa, above, w, tot, vl, zq, sd, rv
    cdef double[::1] p
    while h >= 1:
        p = np.ascontiguousarray(tables[lev], dtype=np.float64)
        top = p.shape[0] - 1
        nblocks = n // (2 * h)
        sd = sqrt(0.5 * h)
        for j in range(nblocks):
            lft = j * 2 * h
            s = iv[lft + 2 * h] - iv[lft]
            a = iv[lft + h] - iv[lft]
            lo = s - top if s - top > 0 else 0
            hi = s if s < top else top
            below = 0.0
            pa = 0.0
            above = 0.0
            for q in range(lo, hi + 1):
                w = p[q] * p[s - q]
                if q < a:
                    below += w
                elif q == a:
                    pa = w
                else:
                    above += w
            tot = below + pa + above
            rv = vv[nblocks + j]
            if tot > 0.0:
                vl = (below + rv * pa) / tot
                if vl < 0.5:
                    zq = ndtri(vl)
                else:
                    zq = -ndtri((above + (1.0 - rv) * pa) / tot)
            else:
                zq = 0.0
            b[lft + h] = 0.5 * (b[lft] + b[lft + 2 * h]) + sd * zq
        h //= 2
        lev -= 1
    return out
