"""Compiled union-find kernels over flat row-major site arrays."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True, inline="always")
def _union(parent, size, flags, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]
    flags[ra] |= flags[rb]


@njit(cache=True)
def label(member, width, fdx, fdy):
    """Root label of every member site (``-1`` elsewhere); forward offsets only."""
    total = member.size
    parent = np.arange(total, dtype=np.int32)
    size = np.ones(total, dtype=np.int32)
    flags = np.zeros(total, dtype=np.uint8)
    for idx in range(total):
        if not member[idx]:
            continue
        x = idx % width
        y = idx // width
        for t in range(fdx.size):
            nx = x + fdx[t]
            ny = y + fdy[t]
            if nx < 0 or nx >= width or ny < 0 or ny >= width:
                continue
            j = ny * width + nx
            if member[j]:
                _union(parent, size, flags, idx, j)
    out = np.full(total, -1, dtype=np.int32)
    for idx in range(total):
        if member[idx]:
            out[idx] = _find(parent, idx)
    return out


@njit(cache=True)
def crossing_count(member, width, inner, outer, fdx, fdy):
    """Number of clusters of ``member`` meeting both ``inner`` and ``outer`` sites."""
    total = member.size
    parent = np.arange(total, dtype=np.int32)
    size = np.ones(total, dtype=np.int32)
    flags = np.zeros(total, dtype=np.uint8)
    for idx in range(total):
        if member[idx] and inner[idx]:
            flags[idx] = 1
    for idx in range(total):
        if not member[idx]:
            continue
        x = idx % width
        y = idx // width
        for t in range(fdx.size):
            nx = x + fdx[t]
            ny = y + fdy[t]
            if nx < 0 or nx >= width or ny < 0 or ny >= width:
                continue
            j = ny * width + nx
            if member[j]:
                _union(parent, size, flags, idx, j)
    count = 0
    for idx in range(total):
        if member[idx] and outer[idx]:
            r = _find(parent, idx)
            if flags[r] == 1:
                flags[r] = 2
                count += 1
    return count


@njit(cache=True)
def crossing_counts_after_flips(states, width, region, inner, outer, fdx, fdy, sites):
    """Open crossing count (as in ``crossing_count``) after flipping each site in turn."""
    out = np.empty(sites.size, dtype=np.int32)
    member = np.empty(states.size, dtype=np.uint8)
    for t in range(sites.size):
        j = sites[t]
        states[j] ^= 1
        for i in range(states.size):
            member[i] = states[i] & region[i]
        out[t] = crossing_count(member, width, inner, outer, fdx, fdy)
        states[j] ^= 1
    return out


@njit(cache=True)
def annulus_arm_counts(states, width, order, shell_end, scale_shells, ring1,
                       odx, ody, cdx, cdy, origin_nbr):
    """Incremental shell-by-shell labeling of ``A(1, N)`` for both colors.

    ``order`` lists flat indices by shell (origin first, skipped).  After the
    shell ``m = scale_shells[s]`` is added, row ``s`` of the result holds
    ``[open crossing clusters, closed crossing clusters, open cluster through
    an open neighbor of the origin reaching shell m]``.
    """
    total = states.size
    parent = np.arange(total, dtype=np.int32)
    size = np.ones(total, dtype=np.int32)
    flags = np.zeros(total, dtype=np.uint8)
    pos = np.full(total, -1, dtype=np.int32)
    stamp = np.full(total, -1, dtype=np.int32)
    out = np.zeros((scale_shells.size, 3), dtype=np.int32)
    s = 0
    m = 1
    k = 1
    last = shell_end[shell_end.size - 1]
    while k <= last and s < scale_shells.size:
        idx = order[k]
        pos[idx] = k
        st = states[idx]
        if ring1[idx]:
            flags[idx] = 1
            if st == 1 and origin_nbr[idx]:
                flags[idx] = 3
        x = idx % width
        y = idx // width
        if st == 1:
            for t in range(odx.size):
                nx = x + odx[t]
                ny = y + ody[t]
                if nx < 0 or nx >= width or ny < 0 or ny >= width:
                    continue
                j = ny * width + nx
                if pos[j] >= 0 and states[j] == 1:
                    _union(parent, size, flags, idx, j)
        else:
            for t in range(cdx.size):
                nx = x + cdx[t]
                ny = y + cdy[t]
                if nx < 0 or nx >= width or ny < 0 or ny >= width:
                    continue
                j = ny * width + nx
                if pos[j] >= 0 and states[j] == 0:
                    _union(parent, size, flags, idx, j)
        if k == shell_end[m]:
            if m == scale_shells[s]:
                n_open = 0
                n_closed = 0
                through = 0
                for q in range(shell_end[m - 1] + 1, k + 1):
                    i2 = order[q]
                    r = _find(parent, i2)
                    if flags[r] & 1 and stamp[r] != m:
                        stamp[r] = m
                        if states[i2] == 1:
                            n_open += 1
                            if flags[r] & 2:
                                through = 1
                        else:
                            n_closed += 1
                out[s, 0] = n_open
                out[s, 1] = n_closed
                out[s, 2] = through
                s += 1
            m += 1
        k += 1
    return out


@njit(cache=True)
def box_crossing_multiscale(states, width, order, shell_end, norms, pair_n1, pair_n2,
                            odx, ody):
    """Open clusters of ``B_n2`` meeting ``B_n1`` and the shell ``n2``, for every pair.

    Sites are added shell by shell from the origin, so after shell ``m`` the
    union-find holds exactly the clusters of ``B_m``.  Pairs must be sorted by
    ``n2``.  Per-cluster minimum norm is carried through unions.
    """
    total = states.size
    parent = np.arange(total, dtype=np.int32)
    size = np.ones(total, dtype=np.int32)
    minnorm = np.full(total, 1 << 30, dtype=np.int32)
    added = np.zeros(total, dtype=np.uint8)
    stamp = np.full(total, -1, dtype=np.int32)
    out = np.zeros(pair_n1.size, dtype=np.int32)
    s = 0
    m = 0
    last = shell_end[shell_end.size - 1]
    for k in range(last + 1):
        if s >= pair_n1.size:
            break
        idx = order[k]
        added[idx] = 1
        if states[idx] == 1:
            minnorm[idx] = norms[idx]
            x = idx % width
            y = idx // width
            for t in range(odx.size):
                nx = x + odx[t]
                ny = y + ody[t]
                if nx < 0 or nx >= width or ny < 0 or ny >= width:
                    continue
                j = ny * width + nx
                if added[j] and states[j] == 1:
                    ra = _find(parent, idx)
                    rb = _find(parent, j)
                    if ra != rb:
                        if size[ra] < size[rb]:
                            ra, rb = rb, ra
                        parent[rb] = ra
                        size[ra] += size[rb]
                        if minnorm[rb] < minnorm[ra]:
                            minnorm[ra] = minnorm[rb]
        if k == shell_end[m]:
            while s < pair_n1.size and pair_n2[s] == m:
                tag = s
                z = 0
                lo = shell_end[m - 1] + 1 if m > 0 else 0
                for q in range(lo, k + 1):
                    i2 = order[q]
                    if states[i2] == 1:
                        r = _find(parent, i2)
                        if stamp[r] != tag and minnorm[r] <= pair_n1[s]:
                            stamp[r] = tag
                            z += 1
                out[s] = z
                s += 1
            m += 1
    return out


@njit(cache=True)
def count_table(n_var, var_idx, width, base, region, color, inner, outer, fdx, fdy):
    """Crossing count for every assignment of the ``n_var`` variable sites.

    Bit ``b`` of the configuration code is the state of site ``var_idx[b]``;
    all other sites keep ``base``.  Counts the clusters of sites with state
    ``color`` inside ``region`` that meet ``inner`` and ``outer``.
    """
    n_conf = 1 << n_var
    out = np.empty(n_conf, dtype=np.uint8)
    states = base.copy()
    member = np.empty(base.size, dtype=np.uint8)
    for code in range(n_conf):
        for b in range(n_var):
            states[var_idx[b]] = (code >> b) & 1
        for i in range(base.size):
            member[i] = region[i] if states[i] == color else 0
        out[code] = crossing_count(member, width, inner, outer, fdx, fdy)
    return out


@njit(cache=True)
def popcounts(n_var):
    n_conf = 1 << n_var
    out = np.empty(n_conf, dtype=np.uint8)
    out[0] = 0
    for code in range(1, n_conf):
        out[code] = out[code >> 1] + (code & 1)
    return out


@njit(cache=True)
def accumulate_flip_tables(z, pop, n_var, interior_bits):
    """Integer tallies over all configurations, grouped by number of open sites.

    Returns per ``(n_open, site, state)``: pivotal counts, sums of ``Z`` over
    pivotal configurations; per ``n_open``: histogram of ``Z``; and the number
    of (configuration, interior open site) pairs where closing the site lowers ``Z``.
    """
    n_conf = 1 << n_var
    zmax = 0
    for c in range(n_conf):
        if z[c] > zmax:
            zmax = z[c]
    piv = np.zeros((n_var + 1, n_var, 2), dtype=np.int64)
    zpiv = np.zeros((n_var + 1, n_var, 2), dtype=np.int64)
    hist = np.zeros((n_var + 1, zmax + 1), dtype=np.int64)
    violations = 0
    for c in range(n_conf):
        k = pop[c]
        zc = z[c]
        hist[k, zc] += 1
        for b in range(n_var):
            zf = z[c ^ (1 << b)]
            s = (c >> b) & 1
            if zf != zc:
                piv[k, b, s] += 1
                zpiv[k, b, s] += zc
            if s == 1 and interior_bits[b] and zf < zc:
                violations += 1
    return piv, zpiv, hist, violations


# Compiled port of the interface exploration (the Python version in
# ``explore`` is the reference; tests require identical reveal sequences).

@njit(cache=True, inline="always")
def _reveal(states, known, order, cnt, idx):
    if known[idx] < 0:
        known[idx] = states[idx]
        order[cnt[0]] = idx
        cnt[0] += 1
    return known[idx]


@njit(cache=True)
def explore_flat(states, nb, n, tri, rx, ry, odx, ody, known, order, cnt,
                 ops, seen, queue, stamp):
    """Run the exploration on the flat states of ``B_nb``; returns ``Z``.

    Reveals are appended to ``order`` (``cnt[0]`` entries) and cached in
    ``known``, which the caller resets.  ``seen`` holds BFS stamps and
    ``stamp[0]`` is a run-unique counter.
    """
    W = 2 * nb + 1
    N = 2 * n
    L = rx.size
    st = np.empty(L, dtype=np.int8)
    any_open = False
    all_open = True
    for i in range(L):
        st[i] = _reveal(states, known, order, cnt, (ry[i] + nb) * W + (rx[i] + nb))
        if st[i]:
            any_open = True
        else:
            all_open = False
    if not any_open:
        return 0
    arc = np.full(L, -1, dtype=np.int64)
    n_arcs = 0
    if all_open:
        for i in range(L):
            arc[i] = 0
        n_arcs = 1
    else:
        start = 0
        while st[start]:
            start += 1
        for k in range(1, L + 1):
            i = (start + k) % L
            if st[i]:
                if not st[(i - 1) % L]:
                    n_arcs += 1
                arc[i] = n_arcs - 1
    parent = np.arange(n_arcs)
    # trace records: start arc, [lo, hi) into ops
    t_arc = np.empty(L, dtype=np.int64)
    t_lo = np.empty(L, dtype=np.int64)
    t_hi = np.empty(L, dtype=np.int64)
    n_tr = 0
    n_ops = 0
    for i in range(L):
        j = (i + 1) % L
        if not (st[i] == 1 and st[j] == 0):
            continue
        ax, ay, bx, by = rx[i], ry[i], rx[j], ry[j]
        t_arc[n_tr] = arc[i]
        t_lo[n_tr] = n_ops
        ops[n_ops] = (ay + nb) * W + (ax + nb)
        n_ops += 1
        while True:
            dx = bx - ax
            dy = by - ay
            tx = -dy
            ty = dx
            a2x = ax + tx
            a2y = ay + ty
            if max(abs(a2x), abs(a2y)) > N:
                break
            b2x = bx + tx
            b2y = by + ty
            ia2 = (a2y + nb) * W + (a2x + nb)
            ib2 = (b2y + nb) * W + (b2x + nb)
            sx = tx + dx
            sy = ty + dy
            if tri and sx == sy:
                if _reveal(states, known, order, cnt, ib2):
                    ax, ay = b2x, b2y
                elif _reveal(states, known, order, cnt, ia2):
                    ax, ay, bx, by = a2x, a2y, b2x, b2y
                else:
                    bx, by = a2x, a2y
            else:
                if not _reveal(states, known, order, cnt, ia2):
                    bx, by = a2x, a2y
                elif not _reveal(states, known, order, cnt, ib2):
                    ax, ay, bx, by = a2x, a2y, b2x, b2y
                else:
                    ax, ay = b2x, b2y
            if n_ops >= ops.size:
                return -1
            ops[n_ops] = (ay + nb) * W + (ax + nb)
            n_ops += 1
        t_hi[n_tr] = n_ops
        n_tr += 1
        # the exit site lies on the ring
        if ax == N:
            e = ay + N
        elif ay == N:
            e = 2 * N + (N - ax)
        elif ax == -N:
            e = 4 * N + (N - ay)
        else:
            e = 6 * N + (ax + N)
        ra = arc[i]
        while parent[ra] != ra:
            parent[ra] = parent[parent[ra]]
            ra = parent[ra]
        rb = arc[e]
        while parent[rb] != rb:
            parent[rb] = parent[parent[rb]]
            rb = parent[rb]
        parent[rb] = ra
    roots = np.empty(n_arcs, dtype=np.int64)
    for a in range(n_arcs):
        r = a
        while parent[r] != r:
            r = parent[r]
        roots[a] = r
    done = np.zeros(n_arcs, dtype=np.uint8)
    z = 0
    for a0 in range(n_arcs):
        r = roots[a0]
        if done[r]:
            continue
        done[r] = 1
        stamp[0] += 1
        tag = stamp[0]
        q_hi = 0
        found = False
        for a in range(a0, n_arcs):
            if roots[a] != r:
                continue
            for i in range(L):
                if arc[i] == a:
                    idx = (ry[i] + nb) * W + (rx[i] + nb)
                    if seen[idx] != tag:
                        seen[idx] = tag
                        queue[q_hi] = idx
                        q_hi += 1
            for t in range(n_tr):
                if t_arc[t] == a:
                    for q in range(t_lo[t], t_hi[t]):
                        idx = ops[q]
                        if seen[idx] != tag:
                            seen[idx] = tag
                            queue[q_hi] = idx
                            q_hi += 1
        for q in range(q_hi):
            idx = queue[q]
            x = idx % W - nb
            y = idx // W - nb
            if max(abs(x), abs(y)) <= n:
                found = True
                break
        q_lo = 0
        while not found and q_lo < q_hi:
            u = queue[q_lo]
            q_lo += 1
            ux = u % W - nb
            uy = u // W - nb
            for t in range(odx.size):
                wx = ux + odx[t]
                wy = uy + ody[t]
                if max(abs(wx), abs(wy)) > N:
                    continue
                w = (wy + nb) * W + (wx + nb)
                if seen[w] == tag:
                    continue
                seen[w] = tag
                if _reveal(states, known, order, cnt, w):
                    if max(abs(wx), abs(wy)) <= n:
                        found = True
                        break
                    queue[q_hi] = w
                    q_hi += 1
        if found:
            z += 1
    return z


@njit(cache=True)
def explore_enumerate(n_var, var_idx, base, nb, n, tri, rx, ry, odx, ody):
    """Exploration over every assignment of the variable sites.

    Returns the revealed-variable bit mask and the exploration ``Z`` per code.
    """
    total = base.size
    bit_of = np.full(total, -1, dtype=np.int64)
    for b in range(n_var):
        bit_of[var_idx[b]] = b
    n_conf = 1 << n_var
    rev = np.zeros(n_conf, dtype=np.uint32)
    zex = np.zeros(n_conf, dtype=np.uint8)
    states = base.copy()
    known = np.full(total, -1, dtype=np.int8)
    order = np.empty(total, dtype=np.int64)
    cnt = np.zeros(1, dtype=np.int64)
    ops = np.empty(16 * total + 64, dtype=np.int64)
    seen = np.zeros(total, dtype=np.int64)
    queue = np.empty(total + ops.size, dtype=np.int64)
    stamp = np.zeros(1, dtype=np.int64)
    for code in range(n_conf):
        for b in range(n_var):
            states[var_idx[b]] = (code >> b) & 1
        cnt[0] = 0
        z = explore_flat(states, nb, n, tri, rx, ry, odx, ody, known, order, cnt,
                         ops, seen, queue, stamp)
        m = 0
        for q in range(cnt[0]):
            idx = order[q]
            known[idx] = -1
            b = bit_of[idx]
            if b >= 0:
                m |= 1 << b
        rev[code] = m
        zex[code] = z
    return rev, zex


@njit(cache=True)
def accumulate_reveal_tables(rev, zex, z, pop, n_var):
    """Integer tallies of visited indicators, grouped by number of open sites.

    ``ey[k, j, s]`` counts configurations with ``v_j`` visited in state ``s``;
    ``ezy`` sums ``Z`` over them; ``pair[k, i, j, si, sj]`` counts joint visits.
    Also returns the number of ``Z`` mismatches and of flip-invariance failures.
    """
    n_conf = 1 << n_var
    ey = np.zeros((n_var + 1, n_var, 2), dtype=np.int64)
    ezy = np.zeros((n_var + 1, n_var, 2), dtype=np.int64)
    pair = np.zeros((n_var + 1, n_var, n_var, 2, 2), dtype=np.int64)
    z_bad = 0
    flip_bad = 0
    bits = np.empty(n_var, dtype=np.int64)
    for c in range(n_conf):
        if zex[c] != z[c]:
            z_bad += 1
        k = pop[c]
        m = rev[c]
        nb = 0
        for j in range(n_var):
            if (m >> j) & 1:
                if not (rev[c ^ (1 << j)] >> j) & 1:
                    flip_bad += 1
                s = (c >> j) & 1
                ey[k, j, s] += 1
                ezy[k, j, s] += z[c]
                bits[nb] = j
                nb += 1
        for u in range(nb):
            i = bits[u]
            si = (c >> i) & 1
            for w in range(u + 1, nb):
                j = bits[w]
                pair[k, i, j, si, (c >> j) & 1] += 1
    return ey, ezy, pair, z_bad, flip_bad


@njit(cache=True)
def truncated_reach_table(n_var, var_idx, base, color, sources, succ_ptr, succ_idx, targets):
    """Per code: does a path of ``color`` sites lead from a source to a target.

    ``succ_ptr``/``succ_idx`` is a CSR list of allowed directed steps, so the
    path geometry is decided by the caller.
    """
    total = base.size
    n_conf = 1 << n_var
    out = np.zeros(n_conf, dtype=np.uint8)
    states = base.copy()
    seen = np.zeros(total, dtype=np.int64)
    queue = np.empty(total, dtype=np.int64)
    for code in range(n_conf):
        for b in range(n_var):
            states[var_idx[b]] = (code >> b) & 1
        tag = code + 1
        hi = 0
        for i in range(total):
            if sources[i] and states[i] == color:
                seen[i] = tag
                queue[hi] = i
                hi += 1
        lo = 0
        hit = 0
        while lo < hi and not hit:
            u = queue[lo]
            lo += 1
            if targets[u]:
                hit = 1
                break
            for e in range(succ_ptr[u], succ_ptr[u + 1]):
                w = succ_idx[e]
                if states[w] == color and seen[w] != tag:
                    seen[w] = tag
                    queue[hi] = w
                    hi += 1
        out[code] = hit
    return out
