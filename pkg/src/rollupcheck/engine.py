"""Compiled breadth-first search over bit-packed L1 states.

A state is flattened into a vector of small integer fields (see `Layout`)
and packed into one or two int64 words.  Under value semantics every claim
is built on the finalized state current at the time, so a claim is fully
described by its diff plus one bit saying whether its base is the current
finalized state or the one just before it; older claims are dropped when a
block is processed.  Four block bitmasks therefore hold the two claim sets.

Property monitors run on every explored edge.  Monitors of past-time or
eventual properties keep a small memo that is packed with the state, so
the search is over the product of the state graph and the monitor, and
deduplication on the product is exact.

Nothing in here knows about `L1State`; `rollupcheck.explorer` converts.
"""
from __future__ import annotations

import numpy as np
from numba import njit

# -- monitor bits -----------------------------------------------------------------

MONITORS = (
    "SRP1", "SRP2", "SRP3", "SRP4",
    "FQP1", "FQP2", "FQP2'", "FQP3", "FQP4", "FQP5", "FQP6",
    "BP1", "BP2", "BP3", "BP4", "BP5",
    "UP1", "UP1'", "UP2", "UP2'", "UP3", "UP4",
    "FREEZE",
    "goal:finalize-one", "goal:frozen", "goal:double-blacklist",
)
BIT = {name: n for n, name in enumerate(MONITORS)}
NMON = len(MONITORS)

M_SRP2, M_SRP3, M_SRP4 = BIT["SRP2"], BIT["SRP3"], BIT["SRP4"]
M_FQP1, M_FQP2, M_FQP2P, M_FQP3 = BIT["FQP1"], BIT["FQP2"], BIT["FQP2'"], BIT["FQP3"]
M_FQP4, M_FQP5, M_FQP6 = BIT["FQP4"], BIT["FQP5"], BIT["FQP6"]
M_BP1, M_BP2, M_BP3, M_BP4, M_BP5 = BIT["BP1"], BIT["BP2"], BIT["BP3"], BIT["BP4"], BIT["BP5"]
M_UP1, M_UP1P, M_UP2, M_UP2P = BIT["UP1"], BIT["UP1'"], BIT["UP2"], BIT["UP2'"]
M_UP3, M_UP4, M_FREEZE = BIT["UP3"], BIT["UP4"], BIT["FREEZE"]
M_G_FIN, M_G_FROZEN, M_G_DOUBLE = BIT["goal:finalize-one"], BIT["goal:frozen"], BIT["goal:double-blacklist"]

# event kinds, in canonical order
K_RC, K_RP, K_ROLLUP, K_FORCED, K_UPDATE, K_INIT, K_TIMEOUT, K_DEPLOY, K_ADMIN, K_STUTTER = range(10)
EV_SHIFT = 16

# -- configuration vector ----------------------------------------------------------

(C_N, C_NB, C_NSETS, C_QB, C_CAP, C_LMAX,
 C_FQ, C_BVQ, C_UPG, C_HASBL, C_FLAW, C_UPD, C_MUT, C_ACTIVE,
 C_NF, C_W, C_MAXSUCC,
 I_FL, I_FB, I_CC, I_CS, I_PC, I_PS, I_QL, I_Q, I_BL, I_ONG, I_TOUT,
 I_J, I_S, I_BPF, I_A, I_OK, I_U, I_P, I_WB, C_SIZE) = range(37)

MUT_SKIP_HEAD, MUT_LOSSY, MUT_NOCOMP, MUT_UNPROVEN = 1, 2, 4, 8
FLAW_NONE, FLAW_SPOT, FLAW_TIMEOUT = 0, 1, 2


class Layout:
    """Field offsets and bit positions for one (scope, variant, monitor set)."""

    def __init__(self, n, nb, qb, lmax, fields_active):
        nsets = 1 << n
        widths = []
        offsets = {}

        def add(name, count, bits):
            offsets[name] = len(widths)
            widths.extend([bits] * count)

        def bits_for(maxval):
            return max(int(maxval).bit_length(), 1)

        add("FL", 1, bits_for(lmax))
        add("FB", lmax, bits_for(nb - 1))
        for name in ("CC", "CS", "PC", "PS"):
            add(name, 1, nb)
        add("QL", 1, bits_for(qb))
        add("Q", qb, bits_for(n + nsets))
        add("BL", 1, n)
        add("ONG", 1, bits_for(nsets))
        add("TOUT", 1, nsets)
        memo = {"J": nb, "S": n, "BPF": 1, "A": n, "OK": 1, "U": n, "P": n, "WB": n}
        for name, bits in memo.items():
            add(name, 1, bits if name in fields_active else 0)
        # first-fit into 63-bit words; no field straddles a word
        word, shift = [], []
        w, used = 0, 0
        for bits in widths:
            if bits > 63:
                raise ValueError("field too wide to pack")
            if used + bits > 63:
                w, used = w + 1, 0
            word.append(w)
            shift.append(used)
            used += bits
        self.nwords = w + 1
        self.offsets = offsets
        self.widths = np.array(widths, dtype=np.int64)
        self.word = np.array(word, dtype=np.int64)
        self.shift = np.array(shift, dtype=np.int64)
        self.mask = np.array([(1 << b) - 1 for b in widths], dtype=np.int64)
        self.nfields = len(widths)


# -- kernel helpers -----------------------------------------------------------------

@njit(cache=True, inline="always")
def _bit(x, i):
    return (x >> i) & 1


@njit(cache=True)
def _popcount(x):
    c = 0
    while x:
        x &= x - 1
        c += 1
    return c


@njit(cache=True)
def _unpack(states, idx, word, shift, mask, f):
    for i in range(f.shape[0]):
        f[i] = (states[idx, word[i]] >> shift[i]) & mask[i]


@njit(cache=True)
def _pack(f, word, shift, out):
    for w in range(out.shape[0]):
        out[w] = 0
    for i in range(f.shape[0]):
        out[word[i]] |= f[i] << shift[i]


@njit(cache=True)
def _hash(key):
    h = np.uint64(0x9E3779B97F4A7C15)
    for w in range(key.shape[0]):
        x = h ^ np.uint64(key[w])
        x ^= x >> np.uint64(30)
        x *= np.uint64(0xBF58476D1CE4E5B9)
        x ^= x >> np.uint64(27)
        x *= np.uint64(0x94D049BB133111EB)
        x ^= x >> np.uint64(31)
        h = x
    return h


@njit(cache=True)
def _find_or_insert(states, table, key, n):
    """Index of `key`, inserting it at row `n` when absent.  Returns (idx, new)."""
    tmask = np.uint64(table.shape[0] - 1)
    slot = _hash(key) & tmask
    nw = key.shape[0]
    while True:
        j = table[slot]
        if j < 0:
            table[slot] = n
            for w in range(nw):
                states[n, w] = key[w]
            return n, True
        same = True
        for w in range(nw):
            if states[j, w] != key[w]:
                same = False
                break
        if same:
            return j, False
        slot = (slot + np.uint64(1)) & tmask


@njit(cache=True)
def rehash(states, n, table):
    table[:] = -1
    tmask = np.uint64(table.shape[0] - 1)
    for i in range(n):
        slot = _hash(states[i]) & tmask
        while table[slot] >= 0:
            slot = (slot + np.uint64(1)) & tmask
        table[slot] = i


@njit(cache=True)
def _fin_blocks(cfg, f):
    m = 0
    for j in range(f[cfg[I_FL]]):
        m |= 1 << f[cfg[I_FB] + j]
    return m


@njit(cache=True)
def _fin_inputs(cfg, f, blockmask):
    m = 0
    for j in range(f[cfg[I_FL]]):
        m |= blockmask[f[cfg[I_FB] + j]]
    return m


@njit(cache=True)
def _queued_forced(cfg, f):
    n = cfg[C_N]
    m = 0
    for j in range(f[cfg[I_QL]]):
        v = f[cfg[I_Q] + j]
        if v <= n:
            m |= 1 << (v - 1)
    return m


@njit(cache=True)
def _frozen(cfg, f):
    if f[cfg[I_QL]] == 0:
        return False
    v = f[cfg[I_Q]]
    return v <= cfg[C_N] and _bit(f[cfg[I_BL]], v - 1) == 1


@njit(cache=True)
def _queue_pos(cfg, f, v):
    for j in range(f[cfg[I_QL]]):
        if f[cfg[I_Q] + j] == v:
            return j
    return -1


@njit(cache=True)
def _same_fin(cfg, a, b):
    fl = a[cfg[I_FL]]
    if fl != b[cfg[I_FL]]:
        return False
    for j in range(fl):
        if a[cfg[I_FB] + j] != b[cfg[I_FB] + j]:
            return False
    return True


@njit(cache=True)
def _same_queue(cfg, a, b):
    ql = a[cfg[I_QL]]
    if ql != b[cfg[I_QL]]:
        return False
    for j in range(ql):
        if a[cfg[I_Q] + j] != b[cfg[I_Q] + j]:
            return False
    return True


@njit(cache=True)
def _monitor(cfg, blockmask, setmask, fs, ft, ev):
    """Update the memo fields of `ft` and return the bits violated on s -> t.

    Goal bits are set when the goal is reached at t.
    """
    act = cfg[C_ACTIVE]
    n = cfg[C_N]
    kind = ev >> EV_SHIFT
    v = 0
    fl_s, fl_t = fs[cfg[I_FL]], ft[cfg[I_FL]]
    grew = fl_t > fl_s
    fin_in_s = _fin_inputs(cfg, fs, blockmask)
    fin_in_t = _fin_inputs(cfg, ft, blockmask)
    ql_s, ql_t = fs[cfg[I_QL]], ft[cfg[I_QL]]
    qs0 = fs[cfg[I_Q]] if ql_s > 0 else 0
    qt0 = ft[cfg[I_Q]] if ql_t > 0 else 0
    bl_s, bl_t = fs[cfg[I_BL]], ft[cfg[I_BL]]
    ong_s, ong_t = fs[cfg[I_ONG]], ft[cfg[I_ONG]]
    same_fin = _same_fin(cfg, fs, ft)
    same_q = _same_queue(cfg, fs, ft)
    qf_t = _queued_forced(cfg, ft)
    frozen_t = _frozen(cfg, ft)

    if _bit(act, M_SRP2):
        ok = fl_t >= fl_s
        for j in range(fl_s):
            if ok and fs[cfg[I_FB] + j] != ft[cfg[I_FB] + j]:
                ok = False
        if not ok:
            v |= 1 << M_SRP2
    if _bit(act, M_SRP3):
        pairs_t = ft[cfg[I_CC]] & (ft[cfg[I_PC]] | ft[cfg[I_PS]])
        j_all = fs[cfg[I_J]] | pairs_t
        if grew and _bit(j_all, ft[cfg[I_FB] + fl_t - 1]) == 0:
            v |= 1 << M_SRP3
        ft[cfg[I_J]] = j_all & ~_fin_blocks(cfg, ft)
    # SRP4: the kernel only ever processes claims on the current state
    if _bit(act, M_FQP1) and ql_s > 0 and not same_fin:
        head_s = qs0 if qs0 <= n else 0
        head_t = qt0 if (ql_t > 0 and qt0 <= n) else 0
        added = blockmask[ft[cfg[I_FB] + fl_t - 1]] if grew else 0
        if (head_s != 0 and _bit(added, head_s - 1) == 0) or head_s == head_t:
            v |= 1 << M_FQP1
    if _bit(act, M_FQP2) and same_fin and ql_t < ql_s:
        v |= 1 << M_FQP2
    if _bit(act, M_FQP2P) and same_fin and ql_t < ql_s:
        ok = ql_s > 0 and qs0 > n and ql_t == ql_s - 1
        if ok:
            for j in range(ql_t):
                if ft[cfg[I_Q] + j] != fs[cfg[I_Q] + j + 1]:
                    ok = False
        if not ok:
            v |= 1 << M_FQP2P
    if _bit(act, M_FQP3) and ql_s > 0 and same_q and not same_fin:
        v |= 1 << M_FQP3
    if _bit(act, M_FQP4) and ql_s > 0 and fl_s < fl_t:
        for j in range(ql_s):
            k = _queue_pos(cfg, ft, fs[cfg[I_Q] + j])
            if k >= 0 and not k < j:
                v |= 1 << M_FQP4
    if _bit(act, M_FQP5):
        for a in range(ql_s):
            ka = _queue_pos(cfg, ft, fs[cfg[I_Q] + a])
            if ka < 0:
                continue
            for b in range(a + 1, ql_s):
                kb = _queue_pos(cfg, ft, fs[cfg[I_Q] + b])
                if kb >= 0 and not ka < kb:
                    v |= 1 << M_FQP5
    if _bit(act, M_FQP6):
        seen = fs[cfg[I_S]]
        if seen & ~qf_t & ~fin_in_t:
            v |= 1 << M_FQP6
        ft[cfg[I_S]] = (seen | qf_t) & ~fin_in_t
    if _bit(act, M_BP1) and (fin_in_t & ~fin_in_s) & bl_s:
        v |= 1 << M_BP1
    if _bit(act, M_BP2):
        flag = fs[cfg[I_BPF]]
        if flag and not same_fin:
            v |= 1 << M_BP2
        ft[cfg[I_BPF]] = 1 if (flag or frozen_t) else 0
    if _bit(act, M_BP3) and frozen_t:
        v |= 1 << M_BP3
    if _bit(act, M_FREEZE) and frozen_t:
        v |= 1 << M_FREEZE
    if _bit(act, M_BP4):
        for a in range(ql_t):
            x = ft[cfg[I_Q] + a]
            if x <= n:
                continue
            pred = setmask[x - n - 1]
            for b in range(a + 1, ql_t):
                y = ft[cfg[I_Q] + b]
                if y <= n and _bit(pred, y - 1):
                    v |= 1 << M_BP4
    if _bit(act, M_BP5):
        has_policy = False
        for a in range(ql_t):
            if ft[cfg[I_Q] + a] > n:
                has_policy = True
        if not has_policy and qf_t & bl_t:
            v |= 1 << M_BP5
    changed = bl_s != bl_t
    changed_by_upgrade = changed and kind != K_UPDATE
    if _bit(act, M_UP1) or _bit(act, M_UP1P):
        x = ong_s - 1
        good = (
            ong_s != 0
            and fs[cfg[I_A]] == bl_s
            and fs[cfg[I_OK]] == 1
            and _bit(fs[cfg[I_TOUT]], x) == 1
        )
        if _bit(act, M_UP1) and changed and not good:
            v |= 1 << M_UP1
        if _bit(act, M_UP1P) and changed_by_upgrade and not good:
            v |= 1 << M_UP1P
        if ong_t == 0:
            ft[cfg[I_A]] = 0
            ft[cfg[I_OK]] = 0
        elif ong_s == 0:
            ft[cfg[I_A]] = bl_s
            ft[cfg[I_OK]] = 1 if bl_t == bl_s else 0
        elif _bit(fs[cfg[I_TOUT]], x) == 0 and bl_t != fs[cfg[I_A]]:
            ft[cfg[I_OK]] = 0
    if _bit(act, M_UP2) or _bit(act, M_UP2P):
        trig = changed_by_upgrade if _bit(act, M_UP2P) else changed
        u = fs[cfg[I_U]]
        p = fs[cfg[I_P]]
        if trig:
            p |= u
        ft[cfg[I_U]] = (u | qf_t) & ~fin_in_t
        ft[cfg[I_P]] = p & ~fin_in_t
    if _bit(act, M_UP3) and changed and ong_t != 0:
        v |= 1 << M_UP3
    if _bit(act, M_UP4) and ong_s != 0 and ong_t != 0 and changed:
        v |= 1 << M_UP4
    if _bit(act, M_G_FIN) and fl_t > 0:
        v |= 1 << M_G_FIN
    if _bit(act, M_G_FROZEN) and frozen_t:
        v |= 1 << M_G_FROZEN
    if _bit(act, M_G_DOUBLE):
        w = fs[cfg[I_WB]]
        if w & fin_in_t:
            v |= 1 << M_G_DOUBLE
        ft[cfg[I_WB]] = w | (bl_t & ~fin_in_t)
    return v & act


@njit(cache=True)
def _emit(cfg, word, shift, blockmask, setmask, states, parent, event, table,
          counters, viol_src, viol_ev, fs, ft, key, p, ev, store):
    v = _monitor(cfg, blockmask, setmask, fs, ft, ev)
    while v:
        b = 0
        while not _bit(v, b):
            b += 1
        v &= ~(1 << b)
        if viol_src[b] < 0:
            viol_src[b] = p
            viol_ev[b] = ev
    if store:
        _pack(ft, word, shift, key)
        n = counters[0]
        idx, new = _find_or_insert(states, table, key, n)
        if new:
            parent[n] = p
            event[n] = ev
            counters[0] = n + 1


@njit(cache=True)
def expand(cfg, word, shift, mask, blockmask, setmask, states, parent, event, table,
           counters, viol_src, viol_ev, lo, hi, store):
    """Expand parents lo..hi-1.  Returns the first parent not expanded.

    Stops early when the next parent might not fit in `states` or would push
    the hash table past half load; the caller grows and resumes.
    """
    nf = cfg[C_NF]
    n = cfg[C_N]
    nb = cfg[C_NB]
    nsets = cfg[C_NSETS]
    fs = np.zeros(nf, dtype=np.int64)
    ft = np.zeros(nf, dtype=np.int64)
    key = np.zeros(cfg[C_W], dtype=np.int64)
    maxsucc = cfg[C_MAXSUCC]
    fq, bvq, upg, hasbl = cfg[C_FQ], cfg[C_BVQ], cfg[C_UPG], cfg[C_HASBL]
    flaw, mut = cfg[C_FLAW], cfg[C_MUT]
    iq, iql, ibl, iong, itout = cfg[I_Q], cfg[I_QL], cfg[I_BL], cfg[I_ONG], cfg[I_TOUT]
    icc, ics, ipc, ips = cfg[I_CC], cfg[I_CS], cfg[I_PC], cfg[I_PS]
    for p in range(lo, hi):
        if store and (counters[0] + maxsucc > states.shape[0]
                      or 2 * (counters[0] + maxsucc) > table.shape[0]):
            return p
        _unpack(states, p, word, shift, mask, fs)
        # a liveness obligation left open at a state is violated by idling there
        if (_bit(cfg[C_ACTIVE], M_UP2) or _bit(cfg[C_ACTIVE], M_UP2P)) and fs[cfg[I_P]] & ~_fin_inputs(cfg, fs, blockmask):
            b = M_UP2P if _bit(cfg[C_ACTIVE], M_UP2P) else M_UP2
            if viol_src[b] < 0:
                viol_src[b] = p
                viol_ev[b] = K_STUTTER << EV_SHIFT
        fl = fs[cfg[I_FL]]
        finb = _fin_blocks(cfg, fs)
        ql = fs[iql]
        # claims
        pending = _popcount(fs[icc]) + _popcount(fs[ics]) + _popcount(fs[ipc]) + _popcount(fs[ips])
        if pending < cfg[C_CAP]:
            for which in range(2):
                slot = icc if which == 0 else ipc
                kind = K_RC if which == 0 else K_RP
                for b in range(nb):
                    if _bit(finb, b) or _bit(fs[slot], b):
                        continue
                    ft[:] = fs
                    ft[slot] |= 1 << b
                    _emit(cfg, word, shift, blockmask, setmask, states, parent, event, table,
                          counters, viol_src, viol_ev, fs, ft, key, p, (kind << EV_SHIFT) | b, store)
        # processing
        ready = fs[icc] if (mut & MUT_UNPROVEN) else (fs[icc] & fs[ipc])
        for b in range(nb):
            if not _bit(ready, b):
                continue
            bm = blockmask[b]
            if fq and ql > 0 and not (mut & MUT_SKIP_HEAD):
                h = fs[iq]
                if h > n or _bit(bm, h - 1) == 0:
                    continue
            if hasbl and fs[ibl] & bm:
                continue
            if bvq:
                blocked = False
                seen_policy = False
                for j in range(ql):
                    x = fs[iq + j]
                    if x > n:
                        seen_policy = True
                    elif seen_policy and _bit(bm, x - 1):
                        blocked = True
                if blocked:
                    continue
            if upg and fs[iong] != 0 and ql == 0:
                continue
            if fl >= cfg[C_LMAX]:
                counters[1] = 1
                continue
            ft[:] = fs
            ft[cfg[I_FB] + fl] = b
            ft[cfg[I_FL]] = fl + 1
            ft[ics] = fs[icc] & ~(1 << b)
            ft[icc] = 0
            ft[ips] = fs[ipc] & ~(1 << b)
            ft[ipc] = 0
            if fq and not (mut & MUT_NOCOMP):
                k = 0
                if not (mut & MUT_LOSSY):
                    for j in range(ql):
                        x = fs[iq + j]
                        if x <= n and _bit(bm, x - 1):
                            continue
                        ft[iq + k] = x
                        k += 1
                for j in range(k, ql):
                    ft[iq + j] = 0
                ft[iql] = k
            _emit(cfg, word, shift, blockmask, setmask, states, parent, event, table,
                  counters, viol_src, viol_ev, fs, ft, key, p, (K_ROLLUP << EV_SHIFT) | b, store)
        # forced queue submissions
        if fq and ql < cfg[C_QB]:
            ong = fs[iong]
            closed = upg and ong != 0 and _bit(fs[itout], ong - 1) == 1
            if not closed:
                for x in range(1, n + nsets + 1):
                    if _queue_pos(cfg, fs, x) >= 0:
                        continue
                    if x > n:
                        if not bvq:
                            continue
                    else:
                        if hasbl and _bit(fs[ibl], x - 1):
                            continue
                        if bvq:
                            banned = False
                            for j in range(ql):
                                y = fs[iq + j]
                                if y > n and _bit(setmask[y - n - 1], x - 1):
                                    banned = True
                            if banned:
                                continue
                    ft[:] = fs
                    ft[iq + ql] = x
                    ft[iql] = ql + 1
                    _emit(cfg, word, shift, blockmask, setmask, states, parent, event, table,
                          counters, viol_src, viol_ev, fs, ft, key, p, (K_FORCED << EV_SHIFT) | (x - 1), store)
        # policy at the head
        if bvq and ql > 0 and fs[iq] > n and not (upg and fs[iong] != 0 and not cfg[C_UPD]):
            k = fs[iq] - n - 1
            ft[:] = fs
            ft[ibl] = setmask[k]
            for j in range(ql - 1):
                ft[iq + j] = fs[iq + j + 1]
            ft[iq + ql - 1] = 0
            ft[iql] = ql - 1
            _emit(cfg, word, shift, blockmask, setmask, states, parent, event, table,
                  counters, viol_src, viol_ev, fs, ft, key, p, (K_UPDATE << EV_SHIFT) | k, store)
        # upgrades
        if upg:
            ong = fs[iong]
            if ong == 0:
                for a in range(nsets):
                    if _bit(fs[itout], a):
                        continue
                    ft[:] = fs
                    ft[iong] = a + 1
                    _emit(cfg, word, shift, blockmask, setmask, states, parent, event, table,
                          counters, viol_src, viol_ev, fs, ft, key, p, (K_INIT << EV_SHIFT) | a, store)
            elif _bit(fs[itout], ong - 1) == 0:
                ft[:] = fs
                ft[itout] |= 1 << (ong - 1)
                _emit(cfg, word, shift, blockmask, setmask, states, parent, event, table,
                      counters, viol_src, viol_ev, fs, ft, key, p, K_TIMEOUT << EV_SHIFT, store)
            elif flaw == FLAW_TIMEOUT or ql == 0:
                ft[:] = fs
                ft[ibl] = setmask[ong - 1]
                ft[iong] = 0
                _emit(cfg, word, shift, blockmask, setmask, states, parent, event, table,
                      counters, viol_src, viol_ev, fs, ft, key, p, K_DEPLOY << EV_SHIFT, store)
        if flaw == FLAW_SPOT:
            for a in range(nsets):
                ft[:] = fs
                ft[ibl] = setmask[a]
                _emit(cfg, word, shift, blockmask, setmask, states, parent, event, table,
                      counters, viol_src, viol_ev, fs, ft, key, p, (K_ADMIN << EV_SHIFT) | a, store)
        ft[:] = fs
        _emit(cfg, word, shift, blockmask, setmask, states, parent, event, table,
              counters, viol_src, viol_ev, fs, ft, key, p, K_STUTTER << EV_SHIFT, store)
    return hi
