"""numba kernels. All of them draw from numba's per-thread ``np.random`` state,
which the batch drivers reseed once per replicate."""
from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def seed(s):
    np.random.seed(s)


# --------------------------------------------------------------------------
# single sweep
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _distinct_positions(two_n, n, out):
    i = 0
    while i < n:
        v = np.random.randint(two_n)
        ok = True
        for j in range(i):
            if out[j] == v:
                ok = False
                break
        if ok:
            out[i] = v
            i += 1


@njit(cache=True, nogil=True)
def _rgs_from_labels(vals, n, out):
    nxt = 0
    for i in range(n):
        g = -1
        for j in range(i):
            if vals[j] == vals[i]:
                g = out[j]
                break
        if g < 0:
            g = nxt
            nxt += 1
        out[i] = g
    return nxt


@njit(cache=True, nogil=True)
def sweep_once(two_n, s, r, n, rgs_out):
    """One sweep from a single B chromosome. Returns (fixed, proposals, ups, downs).

    ``label[i]`` is the time-0 ancestor of individual i at the neutral site, so
    the sample partition is read off the labels of the sampled individuals.
    """
    allele = np.zeros(two_n, np.int8)
    label = np.arange(two_n)
    allele[0] = 1
    x = 1
    tn2 = two_n * two_n
    k = 0
    ups = 0
    downs = 0
    while 0 < x < two_n:
        k += 1
        u = int(np.random.random() * tn2)
        d = u // two_n
        ps = u - d * two_n
        ad = allele[d]
        ap = allele[ps]
        if ad == 1 and ap == 0 and np.random.random() < s:
            continue
        pn = ps
        if r > 0.0 and np.random.random() < r:
            pn = np.random.randint(two_n)
        allele[d] = ap
        label[d] = label[pn]
        if ap != ad:
            if ap > ad:
                ups += 1
            else:
                downs += 1
            x += ap - ad
    pos = np.empty(n, np.int64)
    _distinct_positions(two_n, n, pos)
    vals = np.empty(n, np.int64)
    for i in range(n):
        vals[i] = label[pos[i]]
    _rgs_from_labels(vals, n, rgs_out)
    return x == two_n, k, ups, downs


@njit(cache=True, nogil=True)
def sweep_batch(seeds, two_n, s, r, n, fixed, tau, rgs, ups, downs):
    for i in range(seeds.shape[0]):
        np.random.seed(seeds[i])
        f, k, u, d = sweep_once(two_n, s, r, n, rgs[i])
        fixed[i] = f
        # the proposal clock runs at rate 2N, so the time of the k-th proposal is Gamma(k, 1/2N)
        tau[i] = np.random.gamma(k, 1.0 / two_n)
        ups[i] = u
        downs[i] = d


# --------------------------------------------------------------------------
# recurrent sweeps: pieces used by the driver in moran.py
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def sweep_duration(two_n, s, t0, t_stop):
    """Allele-count chain only. Returns the absorption time, or t_stop if still running."""
    x = 1
    t = t0
    while 0 < x < two_n:
        f = x / two_n
        up = (1.0 - f) * f
        down = f * (1.0 - f) * (1.0 - s)
        rate = two_n * (up + down)
        t += np.random.exponential(1.0 / rate)
        if t >= t_stop:
            return t_stop
        if np.random.random() * (up + down) < up:
            x += 1
        else:
            x -= 1
    return t


@njit(cache=True, nogil=True)
def sweep_segment(two_n, s, r, t0, t_stop, cps, labels_out):
    """Full individual-level sweep started at raw time t0 by one B at index 0.

    Events are applied up to absorption or t_stop. At each checkpoint time in
    ``cps`` (sorted, inside (t0, t_stop)) the current label map is saved to the
    next row of ``labels_out`` and reset to the identity, so row j maps the
    individuals at the end of piece j to those at its start. Returns
    (t_end, fixed, pieces).
    """
    allele = np.zeros(two_n, np.int8)
    allele[0] = 1
    label = np.arange(two_n)
    x = 1
    t = t0
    ci = 0
    ncp = cps.shape[0]
    tn2 = two_n * two_n
    seg = 0
    while 0 < x < two_n:
        t += np.random.exponential(1.0 / two_n)
        while ci < ncp and cps[ci] < min(t, t_stop):
            labels_out[seg, :] = label
            seg += 1
            for i in range(two_n):
                label[i] = i
            ci += 1
        if t >= t_stop:
            t = t_stop
            break
        u = int(np.random.random() * tn2)
        d = u // two_n
        ps = u - d * two_n
        ad = allele[d]
        ap = allele[ps]
        if ad == 1 and ap == 0 and np.random.random() < s:
            continue
        pn = ps
        if r > 0.0 and np.random.random() < r:
            pn = np.random.randint(two_n)
        allele[d] = ap
        label[d] = label[pn]
        x += ap - ad
    labels_out[seg, :] = label
    return t, x == two_n, seg + 1


# --------------------------------------------------------------------------
# partition helpers
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _canon(grp, n, sizes):
    """Relabel block ids by first appearance; fill sizes; return block count."""
    remap = np.full(n, -1, np.int64)
    nxt = 0
    for i in range(n):
        g = grp[i]
        if remap[g] < 0:
            remap[g] = nxt
            sizes[nxt] = 0
            nxt += 1
        grp[i] = remap[g]
        sizes[grp[i]] += 1
    return nxt


@njit(cache=True, nogil=True)
def _apply_groups(grp, n, newid, sizes):
    for i in range(n):
        grp[i] = newid[grp[i]]
    return _canon(grp, n, sizes)


@njit(cache=True, nogil=True)
def _draw_p(kind, a1, a2, cumw):
    u = np.random.random() * cumw[cumw.shape[0] - 1]
    c = 0
    while cumw[c] <= u and c < cumw.shape[0] - 1:
        c += 1
    if kind[c] == 0:
        return a1[c]
    v = np.random.random()
    if kind[c] == 1:
        return a1[c] * math.exp(v * math.log(a2[c] / a1[c]))
    return 1.0 / (1.0 / a2[c] + v * (1.0 / a1[c] - 1.0 / a2[c]))


@njit(cache=True, nogil=True)
def _coin_merge(p, b, newid):
    """p-coin per block; heads go to the smallest head. Returns head count."""
    first = -1
    heads = 0
    for i in range(b):
        newid[i] = i
    for i in range(b):
        if np.random.random() < p:
            heads += 1
            if first < 0:
                first = i
            newid[i] = first
    return heads


@njit(cache=True, nogil=True)
def _paintbox_merge(theta, m, b, newid, frag):
    """Paintbox over one stick-breaking draw R(theta, m), evaluated lazily.

    Fragments are broken off in the order m, m-1, ..., 2; a block lands in
    fragment j with the probability W_j of the current stage. Blocks that land
    nowhere share fragment 1. Returns the resulting number of groups.
    """
    for i in range(b):
        frag[i] = 1
    left = b
    j = m
    while left > 0 and j >= 2:
        if theta < 1.0:
            if theta <= 0.0:
                break
            j -= np.random.geometric(theta) - 1
            if j < 2:
                break
        w = 1.0 - np.random.random() ** (1.0 / (j - 1.0))
        for i in range(b):
            if frag[i] == 1 and np.random.random() < w:
                frag[i] = j
                left -= 1
        j -= 1
    groups = 0
    for i in range(b):
        newid[i] = -1
    for i in range(b):
        if newid[i] >= 0:
            continue
        newid[i] = i
        groups += 1
        for k in range(i + 1, b):
            if newid[k] < 0 and frag[k] == frag[i]:
                newid[k] = i
    return groups


@njit(cache=True, nogil=True)
def _pick_pair(b, newid):
    i = np.random.randint(b)
    j = np.random.randint(b - 1)
    if j >= i:
        j += 1
    lo = min(i, j)
    hi = max(i, j)
    for q in range(b):
        newid[q] = q
    newid[hi] = lo
    return lo, hi


# --------------------------------------------------------------------------
# Lambda- and Xi-coalescents
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def coalescent_core(mode, n, a, kind, a1, a2, cumw, xi_cumrate, xi_s, xi_theta, xi_m,
                    horizon, grp, lengths, visited, rec_t, rec_rgs):
    """Run one labelled coalescent from singletons.

    mode 0: Lambda-coalescent (pairs at rate a, eta events with p-coins).
    mode 1: sweep Xi-coalescent (pairs at rate 1, sweep events with a paintbox).
    lengths[k] accumulates the time spent by blocks of size k. If rec_t is
    nonempty the transitions are written there. Returns
    (transitions, end_time, absorbed, null_events).
    """
    sizes = np.zeros(n, np.int64)
    newid = np.empty(n, np.int64)
    frag = np.empty(n, np.int64)
    for i in range(n):
        grp[i] = i
        sizes[i] = 1
    b = n
    t = 0.0
    nulls = 0
    ev_rate = 0.0
    if mode == 0:
        if cumw.shape[0] > 0:
            ev_rate = cumw[cumw.shape[0] - 1]
    else:
        a = 1.0
        if xi_cumrate.shape[0] > 0:
            ev_rate = xi_cumrate[xi_cumrate.shape[0] - 1]
    visited[n] = 1
    nrec = 0
    record = rec_t.shape[0] > 0
    if record:
        rec_t[0] = 0.0
        for i in range(n):
            rec_rgs[0, i] = grp[i]
        nrec = 1
    while b > 1:
        pair = a * b * (b - 1) / 2.0
        tot = pair + ev_rate
        if tot <= 0.0:
            for q in range(b):
                lengths[sizes[q]] += horizon - t
            t = horizon
            break
        dt = np.random.exponential(1.0 / tot)
        if t + dt >= horizon:
            for q in range(b):
                lengths[sizes[q]] += horizon - t
            t = horizon
            break
        for q in range(b):
            lengths[sizes[q]] += dt
        t += dt
        if np.random.random() * tot < pair:
            _pick_pair(b, newid)
        elif mode == 0:
            p = _draw_p(kind, a1, a2, cumw)
            if _coin_merge(p, b, newid) < 2:
                nulls += 1
                continue
        else:
            u = np.random.random() * ev_rate
            c = 0
            while xi_cumrate[c] <= u and c < xi_cumrate.shape[0] - 1:
                c += 1
            if np.random.random() >= xi_s[c]:
                nulls += 1
                continue
            if _paintbox_merge(xi_theta[c], xi_m[c], b, newid, frag) == b:
                nulls += 1
                continue
        b = _apply_groups(grp, n, newid, sizes)
        visited[b] = 1
        if record:
            rec_t[nrec] = t
            for i in range(n):
                rec_rgs[nrec, i] = grp[i]
            nrec += 1
    return nrec, t, b == 1, nulls


@njit(cache=True, nogil=True)
def coalescent_batch(seeds, mode, n, a, kind, a1, a2, cumw, xi_cumrate, xi_s, xi_theta, xi_m,
                     horizon, rgs_out, lengths_out, tend_out, visited_out, nulls_out):
    rec_t = np.empty(0)
    rec_rgs = np.empty((0, n), np.int64)
    visited = np.zeros(n + 1, np.int8)
    lengths = np.zeros(n + 1)
    for r in range(seeds.shape[0]):
        np.random.seed(seeds[r])
        visited[:] = 0
        lengths[:] = 0.0
        _, t, _, nl = coalescent_core(mode, n, a, kind, a1, a2, cumw, xi_cumrate, xi_s,
                                      xi_theta, xi_m, horizon, rgs_out[r], lengths,
                                      visited, rec_t, rec_rgs)
        tend_out[r] = t
        nulls_out[r] = nl
        for k in range(1, n):
            lengths_out[r, k - 1] = lengths[k]
        if visited_out.shape[0] > 0:
            visited_out[r, :] = visited


@njit(cache=True, nogil=True)
def first_jump_batch(seeds, b, a, kind, a1, a2, cumw, out):
    """Size k of the first effective merger from b blocks (Lambda-coalescent)."""
    newid = np.empty(b, np.int64)
    eta = cumw[cumw.shape[0] - 1] if cumw.shape[0] > 0 else 0.0
    pair = a * b * (b - 1) / 2.0
    for r in range(seeds.shape[0]):
        np.random.seed(seeds[r])
        while True:
            if np.random.random() * (pair + eta) < pair:
                out[r] = 2
                break
            p = _draw_p(kind, a1, a2, cumw)
            h = _coin_merge(p, b, newid)
            if h >= 2:
                out[r] = h
                break


@njit(cache=True, nogil=True)
def coupled_core(n, kind, a1, a2, cumw, rec_tk, rec_gk, rec_tl, rec_gl):
    """Kingman path and Lambda path (a = 1) sharing pairwise-merger points.

    A pair point picks two block indices of the Kingman path; the Lambda path
    applies it when both indices are among its own blocks, which thins the
    points to rate C(b,2) there. eta events drive the Lambda path only.
    Returns (identical, J_kingman, J_lambda, eta_mergers, nk, nl).
    """
    gk = np.empty(n, np.int64)
    gl = np.empty(n, np.int64)
    sk = np.empty(n, np.int64)
    sl = np.empty(n, np.int64)
    newid = np.empty(n, np.int64)
    eta = cumw[cumw.shape[0] - 1] if cumw.shape[0] > 0 else 0.0
    record = rec_tk.shape[0] > 0
    for i in range(n):
        gk[i] = i
        gl[i] = i
        sk[i] = 1
        sl[i] = 1
    nk = 0
    nl = 0
    if record:
        rec_tk[0] = 0.0
        rec_tl[0] = 0.0
        rec_gk[0, :] = gk
        rec_gl[0, :] = gl
        nk = 1
        nl = 1
    bk = n
    bl = n
    same = True
    JK = 0.0
    JL = 0.0
    ne = 0
    t = 0.0
    while bk > 1:
        pair = bk * (bk - 1) / 2.0
        e = eta if bl > 1 else 0.0
        tot = pair + e
        dt = np.random.exponential(1.0 / tot)
        t += dt
        for q in range(bk):
            if sk[q] == 1:
                JK += dt
        for q in range(bl):
            if sl[q] == 1:
                JL += dt
        if np.random.random() * tot < pair:
            lo, hi = _pick_pair(bk, newid)
            bk = _apply_groups(gk, n, newid, sk)
            if record:
                rec_tk[nk] = t
                rec_gk[nk, :] = gk
                nk += 1
            if hi < bl:
                bl = _apply_groups(gl, n, newid, sl)
                if record:
                    rec_tl[nl] = t
                    rec_gl[nl, :] = gl
                    nl += 1
        else:
            p = _draw_p(kind, a1, a2, cumw)
            if _coin_merge(p, bl, newid) >= 2:
                bl = _apply_groups(gl, n, newid, sl)
                same = False
                ne += 1
                if record:
                    rec_tl[nl] = t
                    rec_gl[nl, :] = gl
                    nl += 1
    return same, JK, JL, ne, nk, nl


@njit(cache=True, nogil=True)
def coupled_batch(seeds, n, kind, a1, a2, cumw, identical, jk, jl, events):
    et = np.empty(0)
    eg = np.empty((0, n), np.int64)
    for r in range(seeds.shape[0]):
        np.random.seed(seeds[r])
        same, JK, JL, ne, _, _ = coupled_core(n, kind, a1, a2, cumw, et, eg, et, eg)
        identical[r] = same
        jk[r] = JK
        jl[r] = JL
        events[r] = ne
