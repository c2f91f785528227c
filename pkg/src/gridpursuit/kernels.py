"""Hot inner loops of a simulation tick.

Two kernels dominate stepping cost: the bounce fixed point of collision
resolution and the egocentric observation windows. Both are written as
explicit loops over flat arrays so numba can compile them; ``observe_numpy``
is the vectorised fallback for observations. Which route the rest of the
package uses is decided once in :mod:`gridpursuit._accel`.

Integer codes used by the kernels (mirrored by the enums in ``collision``):

* outcome: 0 = disappear (D), 1 = reach (R), 2 = bounce (B)
* event kind: 0 = vertex, 1 = swap, 2 = obstacle, 3 = boundary
* cell_block: -1 free, -2 obstacle, >= 0 id of a frozen (captured) body
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._accel import USE_NUMBA, njit

OUT_D, OUT_R, OUT_B = 0, 1, 2
KIND_VERTEX, KIND_SWAP, KIND_OBSTACLE, KIND_BOUNDARY = 0, 1, 2, 3
EVENT_COLUMNS = 7  # kind, a, b, row, col, out_a, out_b


@njit
def resolve_core(orig, tgt, team, part, cell_block, ao, pair, surround_block):
    """Greatest fixed point of simultaneous movement.

    Returns ``(vacate, dying, events)``. ``vacate[i]`` is set when agent ``i``
    ends the tick on its target cell; ``dying[i]`` when any applied outcome
    for it is D. Dying agents never vacate, so their origin cell stays
    blocked for the whole tick.
    """
    n = orig.shape[0]
    H = cell_block.shape[0]
    W = cell_block.shape[1]
    ncell = H * W
    live = np.zeros(n, np.bool_)
    blocked = np.zeros(n, np.bool_)
    dying = np.zeros(n, np.bool_)
    static_kind = np.full(n, -1, np.int64)
    head_o = np.full(ncell, -1, np.int64)
    next_o = np.full(n, -1, np.int64)
    cnt_o = np.zeros(ncell, np.int64)
    head_t = np.full(ncell, -1, np.int64)
    next_t = np.full(n, -1, np.int64)
    cnt_t = np.zeros(ncell, np.int64)

    # linked lists are built in reverse so each list runs in ascending id
    for i in range(n - 1, -1, -1):
        if not part[i]:
            continue
        co = orig[i, 0] * W + orig[i, 1]
        next_o[i] = head_o[co]
        head_o[co] = i
        cnt_o[co] += 1

    n_static = 0
    for i in range(n - 1, -1, -1):
        if not part[i]:
            continue
        r = tgt[i, 0]
        c = tgt[i, 1]
        if r == orig[i, 0] and c == orig[i, 1]:
            continue
        if r < 0 or r >= H or c < 0 or c >= W:
            static_kind[i] = KIND_BOUNDARY
        elif cell_block[r, c] == -2:
            static_kind[i] = KIND_OBSTACLE
        elif cell_block[r, c] >= 0:
            static_kind[i] = KIND_VERTEX
        else:
            live[i] = True
            ct = r * W + c
            next_t[i] = head_t[ct]
            head_t[ct] = i
            cnt_t[ct] += 1
            continue
        n_static += 1
        if static_kind[i] == KIND_VERTEX or ao != OUT_D:
            blocked[i] = True
        else:
            dying[i] = True

    cap = n_static
    for i in range(n):
        if live[i]:
            ct = tgt[i, 0] * W + tgt[i, 1]
            cap += cnt_t[ct] + 2 * cnt_o[ct]
    ev = np.empty((cap, 7), np.int64)
    m = 0

    for i in range(n):
        sk = static_kind[i]
        if sk < 0:
            continue
        ev[m, 0] = sk
        ev[m, 1] = i
        ev[m, 3] = tgt[i, 0]
        ev[m, 4] = tgt[i, 1]
        if sk == KIND_VERTEX:
            ev[m, 2] = cell_block[tgt[i, 0], tgt[i, 1]]
            ev[m, 5] = OUT_B
            ev[m, 6] = OUT_B
        else:
            ev[m, 2] = -1
            ev[m, 5] = OUT_D if ao == OUT_D else OUT_B
            ev[m, 6] = -1
        m += 1

    # contests over the same free cell: decided by intentions alone
    for i in range(n):
        if not live[i]:
            continue
        j = next_t[i]
        while j != -1:
            oi = pair[team[i], team[j]]
            oj = pair[team[j], team[i]]
            ev[m, 0] = KIND_VERTEX
            ev[m, 1] = i
            ev[m, 2] = j
            ev[m, 3] = tgt[i, 0]
            ev[m, 4] = tgt[i, 1]
            ev[m, 5] = oi
            ev[m, 6] = oj
            m += 1
            if oi == OUT_B:
                blocked[i] = True
            elif oi == OUT_D:
                dying[i] = True
            if oj == OUT_B:
                blocked[j] = True
            elif oj == OUT_D:
                dying[j] = True
            j = next_t[j]

    # swaps: i -> origin of k while k -> origin of i
    for i in range(n):
        if not live[i]:
            continue
        k = head_o[tgt[i, 0] * W + tgt[i, 1]]
        while k != -1:
            if k > i and live[k] and tgt[k, 0] == orig[i, 0] and tgt[k, 1] == orig[i, 1]:
                oi = pair[team[i], team[k]]
                ok = pair[team[k], team[i]]
                ev[m, 0] = KIND_SWAP
                ev[m, 1] = i
                ev[m, 2] = k
                ev[m, 3] = tgt[i, 0]
                ev[m, 4] = tgt[i, 1]
                ev[m, 5] = oi
                ev[m, 6] = ok
                m += 1
                if oi == OUT_B:
                    blocked[i] = True
                elif oi == OUT_D:
                    dying[i] = True
                if ok == OUT_B:
                    blocked[k] = True
                elif ok == OUT_D:
                    dying[k] = True
            k = next_o[k]

    # Greatest fixed point of the vacating set: a live mover stops when its
    # target holds a non-vacating agent it may not share the cell with.
    # Every agent is pushed at most once.
    stopped = blocked | dying
    stack = np.empty(n, np.int64)
    sp = 0
    for i in range(n):
        if not live[i] or stopped[i]:
            continue
        k = head_o[tgt[i, 0] * W + tgt[i, 1]]
        while k != -1:
            if (not live[k]) or stopped[k]:
                oi = pair[team[i], team[k]]
                if surround_block and team[i] != team[k]:
                    oi = OUT_B
                if oi != OUT_R:
                    stopped[i] = True
                    stack[sp] = i
                    sp += 1
                    break
            k = next_o[k]
    while sp > 0:
        sp -= 1
        k = stack[sp]
        i = head_t[orig[k, 0] * W + orig[k, 1]]
        while i != -1:
            if not stopped[i]:
                oi = pair[team[i], team[k]]
                if surround_block and team[i] != team[k]:
                    oi = OUT_B
                if oi != OUT_R:
                    stopped[i] = True
                    stack[sp] = i
                    sp += 1
            i = next_t[i]

    # label movers stopped by the fixed point: any B occupant bounces them,
    # otherwise they reach the cell and disappear
    for i in range(n):
        if not live[i] or not stopped[i] or blocked[i] or dying[i]:
            continue
        any_d = False
        k = head_o[tgt[i, 0] * W + tgt[i, 1]]
        while k != -1:
            if (not live[k]) or stopped[k]:
                oi = pair[team[i], team[k]]
                if surround_block and team[i] != team[k]:
                    oi = OUT_B
                if oi == OUT_B:
                    blocked[i] = True
                elif oi == OUT_D:
                    any_d = True
            k = next_o[k]
        if not blocked[i] and any_d:
            dying[i] = True

    # entries into cells held by non-vacating agents; a bounced mover never
    # reaches the occupant, so the occupant's side is recorded as unaffected
    for i in range(n):
        if not live[i]:
            continue
        k = head_o[tgt[i, 0] * W + tgt[i, 1]]
        while k != -1:
            if (not live[k]) or stopped[k]:
                swap = live[k] and tgt[k, 0] == orig[i, 0] and tgt[k, 1] == orig[i, 1]
                if not swap:
                    oi = pair[team[i], team[k]]
                    if surround_block and team[i] != team[k]:
                        oi = OUT_B
                    ok = pair[team[k], team[i]]
                    if blocked[i]:
                        oi = OUT_B
                        if ok == OUT_D:
                            ok = OUT_R
                    ev[m, 0] = KIND_VERTEX
                    ev[m, 1] = i
                    ev[m, 2] = k
                    ev[m, 3] = tgt[i, 0]
                    ev[m, 4] = tgt[i, 1]
                    ev[m, 5] = oi
                    ev[m, 6] = ok
                    m += 1
                    if ok == OUT_D:
                        dying[k] = True
            k = next_o[k]

    vacate = live & ~blocked & ~dying
    return vacate, dying, ev[:m]


@njit
def observe_loops(blockers, pcount, ecount, pos, teams, r):
    """Egocentric windows: blockers (incl. off-grid), teammates, opponents."""
    H = blockers.shape[0]
    W = blockers.shape[1]
    k = 2 * r + 1
    kk = k * k
    m = pos.shape[0]
    out = np.zeros((m, 3 * kk + 2), np.float32)
    for a in range(m):
        r0 = pos[a, 0]
        c0 = pos[a, 1]
        for dr in range(-r, r + 1):
            rr = r0 + dr
            for dc in range(-r, r + 1):
                cc = c0 + dc
                idx = (dr + r) * k + (dc + r)
                if rr < 0 or rr >= H or cc < 0 or cc >= W:
                    out[a, idx] = 1.0
                    continue
                if blockers[rr, cc]:
                    out[a, idx] = 1.0
                if teams[a] == 0:
                    own = pcount[rr, cc]
                    opp = ecount[rr, cc]
                else:
                    own = ecount[rr, cc]
                    opp = pcount[rr, cc]
                if dr == 0 and dc == 0:
                    own -= 1
                if own > 0:
                    out[a, kk + idx] = 1.0
                if opp > 0:
                    out[a, 2 * kk + idx] = 1.0
        out[a, 3 * kk] = r0 / (H - 1) if H > 1 else 0.0
        out[a, 3 * kk + 1] = c0 / (W - 1) if W > 1 else 0.0
    return out


def observe_numpy(blockers, pcount, ecount, pos, teams, r):
    H, W = blockers.shape
    k = 2 * r + 1
    m = pos.shape[0]
    stacked = np.stack([
        np.pad(blockers.astype(np.int64), r, constant_values=1),
        np.pad(pcount, r),
        np.pad(ecount, r),
    ])
    windows = sliding_window_view(stacked, (k, k), axis=(1, 2))
    w = windows[:, pos[:, 0], pos[:, 1]].transpose(1, 0, 2, 3).copy()  # (m, 3, k, k)
    ev = teams == 1
    w[ev, 1], w[ev, 2] = w[ev, 2].copy(), w[ev, 1].copy()
    w[:, 1, r, r] -= 1
    out = np.empty((m, 3 * k * k + 2), np.float32)
    out[:, : 3 * k * k] = (w > 0).reshape(m, 3 * k * k)
    out[:, -2] = pos[:, 0] / (H - 1) if H > 1 else 0.0
    out[:, -1] = pos[:, 1] / (W - 1) if W > 1 else 0.0
    return out


@njit
def occupancy_loops(obstacles, pos, teams, alive, captured):
    """Blocker mask plus per-cell pursuer and evader counts of active agents."""
    H = obstacles.shape[0]
    W = obstacles.shape[1]
    blockers = obstacles.copy()
    pcount = np.zeros((H, W), np.int64)
    ecount = np.zeros((H, W), np.int64)
    for i in range(pos.shape[0]):
        if not alive[i]:
            continue
        r = pos[i, 0]
        c = pos[i, 1]
        if captured[i]:
            blockers[r, c] = True
        elif teams[i] == 0:
            pcount[r, c] += 1
        else:
            ecount[r, c] += 1
    return blockers, pcount, ecount


def occupancy_numpy(obstacles, pos, teams, alive, captured):
    h, w = obstacles.shape
    flat = pos[:, 0] * w + pos[:, 1]
    blockers = obstacles.copy()
    frozen = alive & captured
    if frozen.any():
        blockers.reshape(-1)[flat[frozen]] = True
    active = alive & ~captured
    is_p = teams == 0
    pcount = np.bincount(flat[active & is_p], minlength=h * w).reshape(h, w)
    ecount = np.bincount(flat[active & ~is_p], minlength=h * w).reshape(h, w)
    return blockers, pcount, ecount


observe_windows = observe_loops if USE_NUMBA else observe_numpy
occupancy_grids = occupancy_loops if USE_NUMBA else occupancy_numpy
