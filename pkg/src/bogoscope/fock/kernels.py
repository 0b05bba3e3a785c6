"""Hot assembly loops for Fock-space operators.

Every kernel runs two passes over the basis: a counting pass that sizes the
per-row output block and a fill pass that writes entries into disjoint
ranges, so row order (and therefore the assembled matrix) is reproducible
bit for bit.  Compiled with numba when available; the same source runs as
the pure-numpy fallback (see bogoscope._backend).

Conventions shared by all kernels: ``states`` is the lexicographically
sorted (dim, n_modes) occupation matrix, ``labels`` the (n_modes, 3) integer
mode labels, ``grid`` a dense cube mapping a label shifted by ``off`` to its
mode index (-1 when absent).  Occupation radicals such as
sqrt((N - Nplus)/N) are evaluated on the state they multiply in written
operator order, walking the operator string right to left.
"""

from __future__ import annotations

import numpy as np

from bogoscope._backend import njit

__all__ = [
    "find_row",
    "quartic_pass",
    "pairing_pass",
    "cubic_pass",
    "dressed_cubic_pass",
]


@njit(cache=True)
def find_row(states, key):
    """Binary search for one occupation row; -1 when absent."""
    lo = 0
    hi = states.shape[0]
    m = states.shape[1]
    while lo < hi:
        mid = (lo + hi) >> 1
        cmp = 0
        for j in range(m):
            d = states[mid, j] - key[j]
            if d < 0:
                cmp = -1
                break
            if d > 0:
                cmp = 1
                break
        if cmp == 0:
            return mid
        if cmp < 0:
            lo = mid + 1
        else:
            hi = mid
    return -1


@njit(cache=True)
def quartic_pass(states, labels, grid, off, vhat_m2, coeff,
                 counts, starts, rows, cols, vals, fill):
    """Number-conserving quartic term.

    For annihilated modes (u, v) and created modes (u + r, v - r) the entry
    is coeff * vhat_m2[|r|^2] times the sequential ladder amplitudes; the
    kernel table is indexed by the squared transfer label.
    """
    n_states, n_modes = states.shape
    occ_idx = np.empty(n_modes, np.int64)
    work = np.empty(n_modes, np.int64)
    for i in range(n_states):
        n_occ = 0
        for a in range(n_modes):
            if states[i, a] > 0:
                occ_idx[n_occ] = a
                n_occ += 1
        if fill:
            for a in range(n_modes):
                work[a] = states[i, a]
        pos = starts[i] if fill else 0
        k = 0
        for aa in range(n_occ):
            iu = occ_idx[aa]
            for bb in range(n_occ):
                iv = occ_idx[bb]
                nu_after = states[i, iu] - (1 if iu == iv else 0)
                if nu_after < 1:
                    continue
                f_ann = np.sqrt(float(states[i, iv])) * np.sqrt(float(nu_after))
                for iup in range(n_modes):
                    r0 = labels[iup, 0] - labels[iu, 0]
                    r1 = labels[iup, 1] - labels[iu, 1]
                    r2 = labels[iup, 2] - labels[iu, 2]
                    w0 = labels[iv, 0] - r0
                    w1 = labels[iv, 1] - r1
                    w2 = labels[iv, 2] - r2
                    if w0 < -off or w0 > off or w1 < -off or w1 > off or w2 < -off or w2 > off:
                        continue
                    ivp = grid[w0 + off, w1 + off, w2 + off]
                    if ivp < 0:
                        continue
                    if fill:
                        work[iv] -= 1
                        work[iu] -= 1
                        g1 = work[ivp] + 1
                        work[ivp] += 1
                        g2 = work[iup] + 1
                        work[iup] += 1
                        j = find_row(states, work)
                        m2 = r0 * r0 + r1 * r1 + r2 * r2
                        rows[pos + k] = j
                        cols[pos + k] = i
                        vals[pos + k] = (coeff * vhat_m2[m2] * f_ann
                                         * np.sqrt(float(g1)) * np.sqrt(float(g2)))
                        work[iup] -= 1
                        work[ivp] -= 1
                        work[iu] += 1
                        work[iv] += 1
                    k += 1
        if not fill:
            counts[i] = k


@njit(cache=True)
def pairing_pass(states, neg_index, wvals, n_particles, cap,
                 counts, starts, rows, cols, vals, fill):
    """Pair-creation term and its conjugate.

    Per mode p the written term creates at -p then p, with the radical
    sqrt((N - 1 - Nplus)(N - Nplus))/N on the incoming state; wvals[p]
    carries the mode-dependent prefactor.  Both the entry and its transpose
    are emitted, so the assembled block is symmetric to the last bit.
    """
    n_states, n_modes = states.shape
    work = np.empty(n_modes, np.int64)
    for i in range(n_states):
        t = 0
        for a in range(n_modes):
            t += states[i, a]
        if t + 2 > cap:
            if not fill:
                counts[i] = 0
            continue
        if fill:
            for a in range(n_modes):
                work[a] = states[i, a]
        pos = starts[i] if fill else 0
        k = 0
        rad = np.sqrt((n_particles - 1.0 - t) * (n_particles - t)) / n_particles
        for ip in range(n_modes):
            imp = neg_index[ip]
            if fill:
                g1 = work[imp] + 1
                work[imp] += 1
                g2 = work[ip] + 1
                work[ip] += 1
                j = find_row(states, work)
                v = wvals[ip] * rad * np.sqrt(float(g1)) * np.sqrt(float(g2))
                rows[pos + k] = j
                cols[pos + k] = i
                vals[pos + k] = v
                rows[pos + k + 1] = i
                cols[pos + k + 1] = j
                vals[pos + k + 1] = v
                work[ip] -= 1
                work[imp] -= 1
            k += 2
        if not fill:
            counts[i] = k


@njit(cache=True)
def cubic_pass(states, labels, grid, off, neg_index, vvals, coeff, n_particles, cap,
               counts, starts, rows, cols, vals, fill):
    """Bare cubic term and its conjugate.

    For every pair (p, q) with q occupied and p + q a nonzero set member,
    annihilate q and create -p and p + q; the radical sqrt((N - Nplus)/N)
    multiplies the incoming state.  Entry and transpose are both emitted.
    """
    n_states, n_modes = states.shape
    work = np.empty(n_modes, np.int64)
    for i in range(n_states):
        t = 0
        for a in range(n_modes):
            t += states[i, a]
        if t + 1 > cap or t == 0:
            if not fill:
                counts[i] = 0
            continue
        if fill:
            for a in range(n_modes):
                work[a] = states[i, a]
        pos = starts[i] if fill else 0
        k = 0
        rad = np.sqrt((n_particles - t) / n_particles)
        for iq in range(n_modes):
            if states[i, iq] == 0:
                continue
            for ip in range(n_modes):
                s0 = labels[ip, 0] + labels[iq, 0]
                s1 = labels[ip, 1] + labels[iq, 1]
                s2 = labels[ip, 2] + labels[iq, 2]
                if s0 == 0 and s1 == 0 and s2 == 0:
                    continue
                if s0 < -off or s0 > off or s1 < -off or s1 > off or s2 < -off or s2 > off:
                    continue
                ipq = grid[s0 + off, s1 + off, s2 + off]
                if ipq < 0:
                    continue
                if fill:
                    imp = neg_index[ip]
                    f = np.sqrt(float(work[iq]))
                    work[iq] -= 1
                    f *= np.sqrt(float(work[imp] + 1))
                    work[imp] += 1
                    f *= np.sqrt(float(work[ipq] + 1))
                    work[ipq] += 1
                    j = find_row(states, work)
                    v = coeff * vvals[ip] * rad * f
                    rows[pos + k] = j
                    cols[pos + k] = i
                    vals[pos + k] = v
                    rows[pos + k + 1] = i
                    cols[pos + k + 1] = j
                    vals[pos + k + 1] = v
                    work[ipq] -= 1
                    work[imp] -= 1
                    work[iq] += 1
                k += 2
        if not fill:
            counts[i] = k


@njit(cache=True)
def dressed_cubic_pass(states, labels, grid, off, neg_index, vvals, gamma, sigma,
                       coeff, n_particles, cap,
                       counts, starts, rows, cols, vals, fill):
    """Pair-dressed cubic term and its conjugate.

    Two pieces per (p, q) with p + q a nonzero set member: the gamma piece
    annihilates q and creates -p and p + q; the sigma piece creates -q, -p
    and p + q.  Every dressed ladder operator carries its own
    sqrt((N - Nplus)/N) radical, evaluated right to left.
    """
    n_states, n_modes = states.shape
    work = np.empty(n_modes, np.int64)
    for i in range(n_states):
        t = 0
        for a in range(n_modes):
            t += states[i, a]
        if fill:
            for a in range(n_modes):
                work[a] = states[i, a]
        pos = starts[i] if fill else 0
        k = 0
        may_raise1 = t + 1 <= cap and t >= 1
        may_raise3 = t + 3 <= cap
        if may_raise1 or may_raise3:
            rad1 = (np.sqrt((n_particles - t + 1.0) / n_particles)
                    * np.sqrt((n_particles - t + 1.0) / n_particles)
                    * np.sqrt((n_particles - t) / n_particles))
            rad3 = (np.sqrt((n_particles - t) / n_particles)
                    * np.sqrt((n_particles - t - 1.0) / n_particles)
                    * np.sqrt((n_particles - t - 2.0) / n_particles)) if may_raise3 else 0.0
            for iq in range(n_modes):
                gamma_ok = may_raise1 and states[i, iq] > 0
                if not (gamma_ok or may_raise3):
                    continue
                imq = neg_index[iq]
                for ip in range(n_modes):
                    s0 = labels[ip, 0] + labels[iq, 0]
                    s1 = labels[ip, 1] + labels[iq, 1]
                    s2 = labels[ip, 2] + labels[iq, 2]
                    if s0 == 0 and s1 == 0 and s2 == 0:
                        continue
                    if s0 < -off or s0 > off or s1 < -off or s1 > off or s2 < -off or s2 > off:
                        continue
                    ipq = grid[s0 + off, s1 + off, s2 + off]
                    if ipq < 0:
                        continue
                    imp = neg_index[ip]
                    if gamma_ok:
                        if fill:
                            f = np.sqrt(float(work[iq]))
                            work[iq] -= 1
                            f *= np.sqrt(float(work[imp] + 1))
                            work[imp] += 1
                            f *= np.sqrt(float(work[ipq] + 1))
                            work[ipq] += 1
                            j = find_row(states, work)
                            v = coeff * vvals[ip] * gamma[iq] * rad1 * f
                            rows[pos + k] = j
                            cols[pos + k] = i
                            vals[pos + k] = v
                            rows[pos + k + 1] = i
                            cols[pos + k + 1] = j
                            vals[pos + k + 1] = v
                            work[ipq] -= 1
                            work[imp] -= 1
                            work[iq] += 1
                        k += 2
                    if may_raise3:
                        if fill:
                            f = np.sqrt(float(work[imq] + 1))
                            work[imq] += 1
                            f *= np.sqrt(float(work[imp] + 1))
                            work[imp] += 1
                            f *= np.sqrt(float(work[ipq] + 1))
                            work[ipq] += 1
                            j = find_row(states, work)
                            v = coeff * vvals[ip] * sigma[iq] * rad3 * f
                            rows[pos + k] = j
                            cols[pos + k] = i
                            vals[pos + k] = v
                            rows[pos + k + 1] = i
                            cols[pos + k + 1] = j
                            vals[pos + k + 1] = v
                            work[ipq] -= 1
                            work[imp] -= 1
                            work[imq] -= 1
                        k += 2
        if not fill:
            counts[i] = k
