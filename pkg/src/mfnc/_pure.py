"""Pure-Python fallback for the hot kernels.

Every routine here mirrors ``_core.pyx`` operation for operation (same
summation order, same libm calls through :mod:`math`, same cephes ``ndtri``),
so both backends return bitwise-identical arrays.
"""

import math

import numpy as np
from scipy.special import ndtri

M0 = 0xD2511F53
M1 = 0xCD9E8D57
W0 = 0x9E3779B9
W1 = 0xBB67AE85
MASK32 = 0xFFFFFFFF
TWO_M53 = 2.0 ** -53

# rate-function kind codes shared with the compiled core
RATE_CONSTANT = 0
RATE_CAUCHY = 1
RATE_LOGISTIC = 2


def philox4x32(ctr, key):
    """Philox4x32-10 on an (M, 4) uint32 counter array, vectorized."""
    ctr = np.asarray(ctr, dtype=np.uint64)
    c0, c1, c2, c3 = (ctr[:, j].copy() for j in range(4))
    k0 = np.uint64(int(key[0]) & MASK32)
    k1 = np.uint64(int(key[1]) & MASK32)
    m0, m1, mask = np.uint64(M0), np.uint64(M1), np.uint64(MASK32)
    w0, w1, sh = np.uint64(W0), np.uint64(W1), np.uint64(32)
    for r in range(10):
        if r:
            k0 = (k0 + w0) & mask
            k1 = (k1 + w1) & mask
        p0 = m0 * c0
        p1 = m1 * c2
        c0, c1, c2, c3 = (p1 >> sh) ^ c1 ^ k0, p1 & mask, (p0 >> sh) ^ c3 ^ k1, p0 & mask
    return np.stack([c0, c1, c2, c3], axis=1).astype(np.uint32)


def _philox_scalar(c0, c1, c2, c3, k0, k1):
    for r in range(10):
        if r:
            k0 = (k0 + W0) & MASK32
            k1 = (k1 + W1) & MASK32
        p0 = M0 * c0
        p1 = M1 * c2
        c0, c1, c2, c3 = (p1 >> 32) ^ c1 ^ k0, p1 & MASK32, (p0 >> 32) ^ c3 ^ k1, p0 & MASK32
    return c0, c1


def uniforms(key0, key1, c0, c1, c2, c3):
    """Open-interval uniforms from counters (c0, c1, c2, c3) under key (key0, key1)."""
    c0, c1, c2, c3 = np.broadcast_arrays(*(np.asarray(c, dtype=np.uint64) for c in (c0, c1, c2, c3)))
    shape = c0.shape
    ctr = np.stack([c.ravel() for c in (c0, c1, c2, c3)], axis=1)
    if ctr.shape[0] == 0:
        return np.empty(shape)
    out = philox4x32(ctr, (key0, key1)).astype(np.uint64)
    bits = ((out[:, 0] << np.uint64(32)) | out[:, 1]) >> np.uint64(11)
    return ((bits.astype(np.float64) + 0.5) * TWO_M53).reshape(shape)


def _uniform_scalar(key0, key1, c0, c1, c2, c3):
    w0, w1 = _philox_scalar(c0, c1, c2, c3, key0, key1)
    return ((((w0 << 32) | w1) >> 11) + 0.5) * TWO_M53


def arrivals(key0, key1, replicate, purpose_word, neurons, block_lo, block_hi, rate, t_end):
    """Rate-`rate` Poisson arrivals per neuron on unit blocks, clipped to t < t_end.

    Block b covers [b, b+1) and its gaps are drawn from counter stream
    (draw, neuron, purpose_word | b, replicate).  Returns (times, neuron, block, draw).
    """
    times, who, blk, drw = [], [], [], []
    for i in neurons:
        i = int(i)
        for b in range(block_lo, block_hi):
            t = float(b)
            stop = min(b + 1.0, t_end)
            d = 0
            while True:
                u = _uniform_scalar(key0, key1, d, i, purpose_word | b, replicate)
                t = t - math.log(u) / rate
                if t >= stop:
                    break
                times.append(t)
                who.append(i)
                blk.append(b)
                drw.append(d)
                d += 1
    return (np.array(times, dtype=np.float64), np.array(who, dtype=np.int64),
            np.array(blk, dtype=np.int64), np.array(drw, dtype=np.int64))


def _rate(x, kind, fmin, fmax):
    if kind == RATE_CONSTANT:
        return fmax
    if kind == RATE_CAUCHY:
        return fmin + (fmax - fmin) / (1.0 + x * x)
    if x < -700.0:
        return fmin
    return fmin + (fmax - fmin) / (1.0 + math.exp(-x))


def finite_events(times, neurons, z, u, x0, alpha, kick, kind, fmin, fmax, snap_times, watch):
    """Exact event-driven run of the finite system.

    State of neuron i at time t is y(t) + c_i exp(-alpha (t - r_i)) where y is
    the decayed sum of all kicks and (r_i, c_i) is its last restart.
    Returns (accepted, y_post, watch_left, snaps).
    """
    n = len(x0)
    ne = len(times)
    ns = len(snap_times)
    times, neurons, z, u = (np.asarray(a).tolist() for a in (times, neurons, z, u))
    snap_times = np.asarray(snap_times).tolist()
    c = [float(v) for v in x0]
    r = [0.0] * n
    y = 0.0
    ty = 0.0
    accepted = np.zeros(ne, dtype=bool)
    y_post = np.zeros(ne)
    watch_left = np.zeros(ne)
    snaps = np.empty((ns, n))
    si = 0
    for e in range(ne):
        s = times[e]
        while si < ns and snap_times[si] < s:
            _snapshot(snaps, si, snap_times[si], y, ty, c, r, alpha, n)
            si += 1
        i = neurons[e]
        ys = y * math.exp(-alpha * (s - ty))
        xi = ys + c[i] * math.exp(-alpha * (s - r[i]))
        if not math.isfinite(xi):
            raise FloatingPointError("non-finite potential in finite system")
        if z[e] <= _rate(xi, kind, fmin, fmax):
            accepted[e] = True
            watch_left[e] = ys + c[watch] * math.exp(-alpha * (s - r[watch]))
            y = ys + u[e] * kick
            ty = s
            c[i] = -y
            r[i] = s
            y_post[e] = y
    while si < ns:
        _snapshot(snaps, si, snap_times[si], y, ty, c, r, alpha, n)
        si += 1
    return accepted, y_post, watch_left, snaps


def _snapshot(snaps, si, t, y, ty, c, r, alpha, n):
    yt = y * math.exp(-alpha * (t - ty))
    row = snaps[si]
    for j in range(n):
        row[j] = yt + c[j] * math.exp(-alpha * (t - r[j]))


def aux_events(times, neurons, z, x0, alpha, kind, fmin, fmax, sub_t, sub_w, refresh):
    """Exponential-integrator run of the mean-field auxiliary system.

    Off-grid values of W are read from the linear interpolant of the substep
    values; the diffusion coefficient is recomputed on substeps flagged in
    ``refresh`` (and on the first).  Returns (accepted, states, sigmas).
    """
    n = len(x0)
    ne = len(times)
    nsub = len(sub_t) - 1
    times, neurons, z = (np.asarray(a).tolist() for a in (times, neurons, z))
    refresh = np.asarray(refresh, dtype=bool).tolist()
    x = [float(v) for v in x0]
    states = np.empty((nsub + 1, n))
    states[0] = x0
    sigmas = np.zeros(max(nsub, 0))
    accepted = np.zeros(ne, dtype=bool)
    reset_at = [-1.0] * n
    e = 0
    sigma = 0.0
    for m in range(nsub):
        t0 = float(sub_t[m])
        t1 = float(sub_t[m + 1])
        w0 = float(sub_w[m])
        w1 = float(sub_w[m + 1])
        h = t1 - t0
        dw = w1 - w0
        if refresh[m] or m == 0:
            tot = 0.0
            for j in range(n):
                tot += _rate(x[j], kind, fmin, fmax)
            sigma = math.sqrt(tot / n)
        sigmas[m] = sigma
        touched = []
        while e < ne and times[e] <= t1:
            s = times[e]
            i = neurons[e]
            if reset_at[i] >= 0.0:
                rt = reset_at[i]
                base = 0.0
            else:
                rt = t0
                base = x[i]
            ws = w0 + (s - t0) / h * dw
            wr = w0 + (rt - t0) / h * dw
            xi = base * math.exp(-alpha * (s - rt)) + sigma * (ws - wr)
            if not math.isfinite(xi):
                raise FloatingPointError("non-finite potential in auxiliary system")
            if z[e] <= _rate(xi, kind, fmin, fmax):
                accepted[e] = True
                if reset_at[i] < 0.0:
                    touched.append(i)
                reset_at[i] = s
            e += 1
        decay = math.exp(-alpha * h)
        for j in range(n):
            x[j] = x[j] * decay + sigma * dw
        for i in touched:
            wr = w0 + (reset_at[i] - t0) / h * dw
            x[i] = sigma * (w1 - wr)
            reset_at[i] = -1.0
        states[m + 1] = x
    return accepted, states, sigmas


def dyadic_bridge(idx, tables, v, b_top):
    """Fill B at all integer times by conditional-quantile coupling on dyadic blocks.

    idx holds lattice indices of the walk (idx[0] = 0, len n+1, n a power of
    two); tables[l] is the pmf of the 2**l-step sum; v[node] randomizes atoms.
    """
    n = len(idx) - 1
    b = np.zeros(n + 1)
    if n == 0:
        return b
    b[n] = b_top
    h = n // 2
    lev = n.bit_length() - 2
    while h >= 1:
        p = tables[lev].tolist()
        top = len(p) - 1
        nblocks = n // (2 * h)
        sd = math.sqrt(0.5 * h)
        for j in range(nblocks):
            lft = j * 2 * h
            s = int(idx[lft + 2 * h] - idx[lft])
            a = int(idx[lft + h] - idx[lft])
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
            vv = v[nblocks + j]
            if tot > 0.0:
                vl = (below + vv * pa) / tot
                if vl < 0.5:
                    zq = ndtri(vl)
                else:
                    zq = -ndtri((above + (1.0 - vv) * pa) / tot)
            else:
                zq = 0.0
            b[lft + h] = 0.5 * (b[lft] + b[lft + 2 * h]) + sd * zq
        h //= 2
        lev -= 1
    return b
