"""Closed-form cost kernels.

One mapping is packed into an int64 parameter row (layout below) so that whole
candidate blocks can be costed in a single compiled loop. The same source runs
under numba or as plain Python, see ``_jit``.

Row layout::

    0..2    workload dims M, N, K
    3..5    outer loop order (dim ids, outermost first)
    6..8    outer directive size per dim
    9       outer spatial dim
    10      cluster size
    11      number of clusters
    12..14  inner loop order
    15..17  inner directive size per dim
    18      inner spatial dim, -1 if none
    19      bytes per element
    20      1 to charge the reduction drain in full

Result layout::

    0..2    S2 accesses of A, B, C
    3       runtime cycles
    4       partial sums forwarded between PEs
    5       sum of per-step compute cycles
    6       sum of per-step communication cycles
    7       outer steps
    8       S2 reads of C (revisits)
    9       outer transitions
"""

import math

import numpy as np

from ._jit import njit

NPARAM = 21
NOUT = 10

# (first dim, second dim, the dim the matrix does not depend on) for A, B, C
_MATS = np.array([[0, 2, 1], [2, 1, 0], [0, 1, 2]], dtype=np.int64)


@njit
def _dim_terms(L, d, c, p, s, q, lam):
    """Per-dim quantities for one outer range of length L.

    t   inner steps needed to cover the range
    u0  extent touched by the first inner step across all PEs
    pm  extent handled by the busiest PE
    la  sum over inner steps of (active lanes - 1), inner spatial dim only
    fl  active lanes on the first inner step
    """
    if d == q:
        w = lam * p
        t = (L + w - 1) // w
        rem = L - (t - 1) * w
        u0 = min(w, L)
        pm = (t - 1) * p + min(p, rem)
        la = (t - 1) * (lam - 1) + (rem + p - 1) // p - 1
        fl = (u0 + p - 1) // p
    elif d == s:
        t0 = min(c, L)
        t = (t0 + p - 1) // p
        u0 = (L // c) * min(p, c) + min(p, L % c)
        pm = t0
        la = 0
        fl = 1
    else:
        t = (L + p - 1) // p
        u0 = min(p, L)
        pm = L
        la = 0
        fl = 1
    return t, u0, pm, la, fl


@njit
def _compute(cls, PM, T, LA, FL, q, full_drain):
    v = PM[0, cls[0]] * PM[1, cls[1]] * PM[2, cls[2]]
    if q == 2:
        if full_drain:
            v += T[0, cls[0]] * T[1, cls[1]] * LA[2, cls[2]]
        else:
            v += FL[2, cls[2]] - 1
    return v


@njit
def _comm(cur, prev, changed, kzero, first, Lc, T, U0, ipos, mats, vols):
    """Fill vols[0..2] with S2 element traffic of A, B, C for one outer step
    and return the C elements that are first visits."""
    for x in range(3):
        a = mats[x, 0]
        b = mats[x, 1]
        e = mats[x, 2]
        contiguous = True
        if ipos[a] > ipos[e] and T[a, cur[a]] > 1:
            contiguous = False
        if ipos[b] > ipos[e] and T[b, cur[b]] > 1:
            contiguous = False
        v = Lc[a, cur[a]] * Lc[b, cur[b]]
        if not contiguous:
            v *= T[e, cur[e]]
        if (not first) and (not changed[a]) and (not changed[b]) \
                and T[a, prev[a]] == 1 and T[b, prev[b]] == 1:
            v -= U0[a, cur[a]] * U0[b, cur[b]]
        vols[x] = v
    if kzero:
        return Lc[0, cur[0]] * Lc[1, cur[1]]
    return 0


@njit
def cost_one(prm, bw, out):
    D = prm[0:3]
    oo = prm[3:6]
    c = prm[6:9]
    s = prm[9]
    lam = prm[10]
    nc = prm[11]
    io = prm[12:15]
    p = prm[15:18]
    q = prm[18]
    eb = prm[19]
    full_drain = prm[20] != 0

    n = np.empty(3, np.int64)
    Lc = np.empty((3, 2), np.int64)
    T = np.empty((3, 2), np.int64)
    U0 = np.empty((3, 2), np.int64)
    PM = np.empty((3, 2), np.int64)
    LA = np.empty((3, 2), np.int64)
    FL = np.empty((3, 2), np.int64)
    for d in range(3):
        step = c[d] * nc if d == s else c[d]
        nd = (D[d] + step - 1) // step
        n[d] = nd
        Lc[d, 0] = min(step, D[d])
        Lc[d, 1] = D[d] - (nd - 1) * step
        for k in range(2):
            t_, u_, pm_, la_, fl_ = _dim_terms(Lc[d, k], d, c[d], p[d], s, q, lam)
            T[d, k] = t_
            U0[d, k] = u_
            PM[d, k] = pm_
            LA[d, k] = la_
            FL[d, k] = fl_
    ipos = np.empty(3, np.int64)
    for i in range(3):
        ipos[io[i]] = i

    # outer index categories: 0 first, 1 middle, 2 last, 3 only (n == 1)
    cnt = np.zeros((3, 4), np.int64)
    ccls = np.zeros((3, 4), np.int64)
    czero = np.zeros((3, 4), np.int64)
    for d in range(3):
        if n[d] == 1:
            cnt[d, 3] = 1
            ccls[d, 3] = 1
            czero[d, 3] = 1
        else:
            cnt[d, 0] = 1
            czero[d, 0] = 1
            cnt[d, 1] = n[d] - 2
            cnt[d, 2] = 1
            ccls[d, 2] = 1

    mats = _MATS
    vols = np.zeros(3, np.int64)
    cur = np.zeros(3, np.int64)
    prev = np.zeros(3, np.int64)
    changed = np.zeros(3, np.bool_)
    s2 = np.zeros(3, np.int64)

    # first outer step
    for d in range(3):
        cur[d] = 0 if n[d] > 1 else 1
    first_c = _comm(cur, prev, changed, True, True, Lc, T, U0, ipos, mats, vols)
    b = eb * (vols[0] + vols[1] + 2 * vols[2] - first_c)
    comm_first = np.int64(math.ceil(b / bw))
    for x in range(3):
        s2[x] += vols[x]
    comp_total = _compute(cur, PM, T, LA, FL, q, full_drain)
    comm_total = comm_first
    runtime = comm_first
    steps = np.int64(1)
    transitions = np.int64(0)

    for j in range(3):
        dj = oo[j]
        if n[dj] < 2:
            continue
        ncombo = 4 ** j
        for code in range(ncombo):
            mult = np.int64(1)
            rest = code
            for a in range(j):
                cat = rest % 4
                rest //= 4
                da = oo[a]
                mult *= cnt[da, cat]
                cur[da] = ccls[da, cat]
                prev[da] = ccls[da, cat]
                changed[da] = False
            if mult == 0:
                continue
            kz_above = True
            rest = code
            for a in range(j):
                cat = rest % 4
                rest //= 4
                if oo[a] == 2 and czero[2, cat] == 0:
                    kz_above = False
            for a in range(j + 1, 3):
                da = oo[a]
                prev[da] = 1
                if n[da] == 1:
                    cur[da] = 1
                    changed[da] = False
                else:
                    cur[da] = 0
                    changed[da] = True
            for opt in range(2):
                if opt == 0:
                    m2 = mult * (n[dj] - 2)
                    cur[dj] = 0
                else:
                    m2 = mult
                    cur[dj] = 1
                if m2 == 0:
                    continue
                prev[dj] = 0
                changed[dj] = True
                kzero = kz_above and dj != 2
                fc = _comm(cur, prev, changed, kzero, False, Lc, T, U0, ipos, mats, vols)
                b = eb * (vols[0] + vols[1] + 2 * vols[2] - fc)
                cm = np.int64(math.ceil(b / bw))
                cp = _compute(prev, PM, T, LA, FL, q, full_drain)
                runtime += m2 * max(cp, cm)
                comm_total += m2 * cm
                comp_total += m2 * _compute(cur, PM, T, LA, FL, q, full_drain)
                for x in range(3):
                    s2[x] += m2 * vols[x]
                steps += m2
                transitions += m2

    for d in range(3):
        cur[d] = 1
    runtime += _compute(cur, PM, T, LA, FL, q, full_drain)

    fwd = np.int64(0)
    if q == 2:
        fwd = D[0] * D[1] * ((n[2] - 1) * LA[2, 0] + LA[2, 1])

    mn = D[0] * D[1]
    out[0] = s2[0]
    out[1] = s2[1]
    out[2] = 2 * s2[2] - mn
    out[3] = runtime
    out[4] = fwd
    out[5] = comp_total
    out[6] = comm_total
    out[7] = steps
    out[8] = s2[2] - mn
    out[9] = transitions


@njit(nogil=True)
def cost_batch(params, bw, out):
    for i in range(params.shape[0]):
        cost_one(params[i], bw, out[i])


def evaluate(params, bw):
    """Cost every row of ``params``; returns an (n, NOUT) int64 array."""
    params = np.ascontiguousarray(np.atleast_2d(params), dtype=np.int64)
    out = np.zeros((params.shape[0], NOUT), dtype=np.int64)
    if params.shape[0]:
        cost_batch(params, float(bw), out)
    return out
